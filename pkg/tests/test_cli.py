import csv
import json
import subprocess
import sys

import pytest

from traplab import cli


def _run(tmp_path, *args):
    code = cli.main(list(args) + ["--no-figures"])
    return code


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_criteria_verdicts(tmp_path):
    out = tmp_path / "c"
    assert _run(tmp_path, "criteria", "--out", str(out), "--override", "horn_b=[1,2,3]") == 0
    horn = [r["verdict"] for r in _rows(out / "verdicts.csv") if r["family"] == "horn"]
    assert horn == ["Trap", "Trap", "NonTrap"]


def test_graph_exact_corner_times(tmp_path):
    out = tmp_path / "g"
    assert _run(tmp_path, "graph-exact", "--out", str(out)) == 0
    times = [float(r["corner_exit_time"]) for r in _rows(out / "corner_exit_times.csv")]
    assert times == pytest.approx([1, 5, 25, 125, 625], rel=1e-10)


def test_empty_config_is_schema_error(tmp_path, capsys):
    cfg = tmp_path / "empty.json"
    cfg.write_text("")
    out = tmp_path / "e"
    assert _run(tmp_path, "criteria", "--config", str(cfg), "--out", str(out)) == cli.EXIT_SCHEMA
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["status"] == "error" and rec["error"] == "ConfigError"
    assert json.loads((out / "error.json").read_text())["module"] == "cli"


@pytest.mark.parametrize(
    "doc",
    [{}, {"params": {"horn_bb": [1]}}, {"colour": 1}, {"experiment": "msd"}, {"params": {"horn_b": "wide"}}, {"seed": -1}],
)
def test_schema_rejections(tmp_path, doc):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    with pytest.raises(cli.ConfigError):
        cli.load_config("criteria", cfg)


def test_overrides_and_flags():
    c = cli.load_config("sticky-exit", None, ["bernstein.kind=stable", "n_paths=12", "params.ell=2"], seed=9, workers=3)
    assert c["params"]["bernstein"]["kind"] == "stable"
    assert c["params"]["n_paths"] == 12
    assert c["params"]["ell"] == 2.0 and isinstance(c["params"]["ell"], float)
    assert (c["seed"], c["workers"]) == (9, 3)
    with pytest.raises(cli.ConfigError):
        cli.load_config("sticky-exit", None, ["n_paths"])


def test_manifest_fields(tmp_path):
    out = tmp_path / "m"
    assert _run(tmp_path, "graph-exact", "--out", str(out), "--seed", "77") == 0
    man = json.loads((out / "manifest.json").read_text())
    assert set(man) == {"config", "seed", "version", "started_at", "runtime_seconds", "warnings"}
    assert man["seed"] == 77
    assert man["config"]["params"]["levels"] == [0, 1, 2, 3, 4]


def test_csv_line_endings(tmp_path):
    out = tmp_path / "l"
    _run(tmp_path, "criteria", "--out", str(out))
    raw = (out / "verdicts.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_downstream_error_names_module(tmp_path, capsys):
    out = tmp_path / "x"
    code = _run(tmp_path, "geometry-export", "--out", str(out), "--override", "domain=walled", "--override", "level=3")
    assert code == cli.EXIT_RUNTIME
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["module"] == "geometry"


def test_plot_script_loglog(tmp_path):
    f = tmp_path / "heat_loss.csv"
    f.write_text("t,Q_loss,std_err\n1e-4,0.07,0.001\n1e-3,0.22,0.002\n1e-2,0.7,0.003\n")
    text = cli.emit_plot_script(f, "loglog")
    assert "slope" in text and "errorbar" in text
    compile(text, "plot.py", "exec")


def test_plot_script_series(tmp_path):
    f = tmp_path / "trap_scan.csv"
    f.write_text("depth,mean_TB,std_err,censor_rate\n0,0.1,0.01,0.0\n1,0.2,0.01,0.05\n")
    text = cli.emit_plot_script(f, "series")
    assert "censor" in text
    compile(text, "plot.py", "exec")


def test_plot_script_missing_column(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("depth,mean_TB\n0,1.0\n")
    with pytest.raises(cli.ConfigError, match="std_err"):
        cli.emit_plot_script(f, "series")


def test_plot_script_runs(tmp_path):
    f = tmp_path / "trap_scan.csv"
    f.write_text("depth,mean_TB,std_err,censor_rate\n0,0.1,0.01,0.0\n1,0.2,0.01,0.05\n")
    script = tmp_path / "p.py"
    script.write_text(cli.emit_plot_script(f, "series"))
    subprocess.run([sys.executable, str(script)], check=True, cwd=tmp_path)
    assert (tmp_path / "trap_scan.plot.png").exists()


def test_figures_rendered(tmp_path):
    out = tmp_path / "f"
    assert cli.main(["graph-exact", "--out", str(out)]) == 0
    assert (out / "corner_exit_times.png").stat().st_size > 0


@pytest.mark.parametrize(
    "experiment, overrides",
    [
        ("trap-scan", ["domain=\"square\"", "n_paths=60", "horizon=20"]),
        ("heat-content", ["n_samples=3000"]),
        ("msd", ["level=5", "n_paths=300", "n_steps=2048"]),
    ],
)
def test_workers_byte_identical(tmp_path, experiment, overrides):
    outs = []
    for w in (1, 4):
        out = tmp_path / f"w{w}"
        args = [experiment, "--seed", "31", "--workers", str(w), "--out", str(out)]
        for o in overrides:
            args += ["--override", o]
        assert _run(tmp_path, *args) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].glob("*.csv"))
    assert names
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes(), n
