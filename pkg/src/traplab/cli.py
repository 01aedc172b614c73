"""Experiment runner: ``traplab <experiment> [--config F] [--seed S] [--workers N] [--out DIR] [--override k=v ...]``.

Each run writes CSV results, PNG figures, a matching plot script per CSV and
``manifest.json`` into the output directory.  Failures print a JSON error
record on stderr (and into ``error.json`` when the directory is writable) and
exit nonzero.
"""
from __future__ import annotations

import argparse
import copy
import dataclasses
import csv
import datetime as _dt
import io
import json
import math
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from . import criteria as crit
from . import estimators as est
from . import geometry as geo
from . import graphs as gr
from . import paths as P
from . import subordination as sub
from .fitting import FitError, dyadic_grid

MAX_SEED = 2**64 - 1
MAX_PATHS = 10_000_000
EXIT_SCHEMA = 2
EXIT_RUNTIME = 1

TOP_KEYS = ("experiment", "params", "seed", "workers", "out_dir")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# defaults per experiment (the schema: any key not listed here is rejected)

DEFAULTS: dict[str, dict] = {
    "geometry-export": {
        "domain": "koch", "alpha": 3.0, "level": 3, "gamma": 2.5, "radius": 1.0, "svg_size": 600,
    },
    "graph-exact": {"variant": "SG2", "levels": [0, 1, 2, 3, 4]},
    "criteria": {
        "horn_b": [1.0, 2.0, 3.0],
        "horn_x_cap": 1000.0,
        "modified_koch_gamma": [1.5, 2.0, 3.0],
        "modified_koch_a": 1.0 / 3.0,
        "corner_angles_deg": [60.0, 90.0, 120.0, 180.0, 270.0],
        "koch_alpha": [2.5, 3.0, 4.0],
    },
    "heat-content": {
        "domain": "disk", "radius": 1.0, "alpha": 3.0, "level": 4,
        "t_min": 1e-5, "t_max": 1e-3, "per_octave": 2, "n_samples": 100_000,
        "diffusivity": 1.0, "adaptive": True, "h": 1e-4, "far_field": 10.0,
        "fit_window": None,
    },
    "fractional-heat-content": {
        "domain": "disk", "radius": 1.0, "alpha": 3.0, "level": 4, "beta": 0.5,
        "t_min": 1e-9, "t_max": 1e-5, "per_octave": 2, "n_samples": 100_000,
        "diffusivity": 1.0, "adaptive": True, "h": 1e-4, "far_field": 10.0,
        "fit_window": None,
    },
    "trap-scan": {
        "domain": "koch", "alpha": 3.0, "level": 3, "gamma": 2.5, "depths": [0, 1, 2, 3],
        "ball_center": None, "ball_radius": None, "n_paths": 300, "horizon": 50.0,
        "ratio_threshold": 5.0, "censor_limit": 0.2, "diffusivity": 1.0,
    },
    "sticky-exit": {
        "ell": 1.0, "x0": 0.0, "bernstein": {"kind": "gamma", "a": 1.0, "b": 1.0},
        "eta_over_sigma": 1.0, "n_paths": 10_000, "h": 1e-4, "diffusivity": 1.0,
    },
    "msd": {
        "graph": "SG2", "level": 8, "mode": "walk", "n_steps": 65536, "n_paths": 2000,
        "alpha": 0.5, "t_min": 1e2, "t_max": 1e9, "t_points": 29, "burn_in": 8.0,
    },
    "subordinator-check": {
        "n_samples": 100_000, "alpha": 0.5, "moment_orders": [1.0, 1.5],
        "laplace": [
            {"kind": "stable", "alpha": 0.5},
            {"kind": "gamma", "a": 1.0, "b": 1.0},
            {"kind": "tempered_stable", "alpha": 0.5, "theta": 1.0},
        ],
        "derivative_step": 1e-4,
    },
}

EXPERIMENTS = tuple(DEFAULTS)


# --------------------------------------------------------------------------
# config handling


def _type_ok(default, value) -> bool:
    if default is None or isinstance(default, dict) and not default:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    if isinstance(default, dict):
        return isinstance(value, dict)
    return True


def _merge_params(experiment: str, given: dict) -> dict:
    defaults = DEFAULTS[experiment]
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown params for {experiment}: {', '.join(unknown)}")
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if not _type_ok(defaults[k], v):
            raise ConfigError(f"param {k!r} has the wrong type ({type(v).__name__})")
        out[k] = float(v) if isinstance(defaults[k], float) and v is not None else v
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(raw: dict, item: str) -> None:
    key, sep, value = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not key=value")
    parts = key.split(".")
    if parts[0] in TOP_KEYS and parts[0] != "params":
        if len(parts) > 1:
            raise ConfigError(f"{parts[0]} takes no sub-keys")
        raw[parts[0]] = _parse_value(value)
        return
    if parts[0] == "params":
        parts = parts[1:]
    if not parts:
        raise ConfigError("override names no parameter")
    node = raw.setdefault("params", {})
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-mapping")
    node[parts[-1]] = _parse_value(value)


def load_config(experiment: str, config_path=None, overrides=(), seed=None, workers=None, out_dir=None) -> dict:
    """Resolve a config file, overrides and command-line flags into a full config."""
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    raw: dict = {}
    if config_path is not None:
        text = Path(config_path).read_text(encoding="utf-8")
        if not text.strip():
            raise ConfigError("config file is empty")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict) or not raw:
            raise ConfigError("config must be a non-empty JSON object")
    unknown = sorted(set(raw) - set(TOP_KEYS))
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    if raw.get("experiment", experiment) != experiment:
        raise ConfigError(f"config is for {raw['experiment']!r}, not {experiment!r}")
    for item in overrides:
        _apply_override(raw, item)
    if seed is not None:
        raw["seed"] = seed
    if workers is not None:
        raw["workers"] = workers
    if out_dir is not None:
        raw["out_dir"] = str(out_dir)
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be a mapping")
    s = raw.get("seed", 0)
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s <= MAX_SEED:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    w = raw.get("workers", 1)
    if isinstance(w, bool) or not isinstance(w, int) or w < 1:
        raise ConfigError("workers must be a positive integer")
    od = raw.get("out_dir", "out")
    if not isinstance(od, str) or not od:
        raise ConfigError("out_dir must be a path string")
    return {
        "experiment": experiment,
        "params": _merge_params(experiment, params),
        "seed": s,
        "workers": w,
        "out_dir": od,
    }


# --------------------------------------------------------------------------
# experiments: each returns {"csv": {name: text}, "figures": [(name, fn)], "warnings": [...]}


def _domain(p: dict):
    kind = p["domain"]
    if kind == "disk":
        return geo.Disk(radius=p["radius"])
    if kind == "square":
        return geo.unit_square()
    if kind == "koch":
        return geo.build_koch_snowflake(p["alpha"], p["level"])
    if kind == "walled":
        return geo.build_walled_snowflake(p["alpha"], p["level"], p["gamma"])
    raise ConfigError(f"unknown domain {kind!r}")


def _check_paths(n: int, name: str = "n_paths") -> None:
    if not 1 <= n <= MAX_PATHS:
        raise ConfigError(f"{name} must lie in [1, {MAX_PATHS}]")


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_cell(v) for v in r) + "\n")
    return buf.getvalue()


def _fit_csv(fit) -> str:
    return _rows_csv(
        ("exponent", "coefficient", "std_err", "r_squared", "t_lo", "t_hi", "n_points"),
        [(fit.exponent, fit.coefficient, fit.std_err, fit.r_squared, float(fit.t_window[0]), float(fit.t_window[1]), fit.n_points)],
    )


def run_geometry_export(p, seed, workers):
    dom = _domain(p)

    def fig(ax):
        for ring in geo.outline_rings(dom):
            ax.plot(ring[:, 0], ring[:, 1], lw=0.6, color="k")
        ax.set_aspect("equal")
        ax.set_title(p["domain"])

    return {
        "csv": {"geometry.csv": geo.to_csv(dom)},
        "files": {"geometry.svg": geo.to_svg(dom, size=p["svg_size"])},
        "figures": [("geometry.png", fig)],
        "warnings": [],
    }


def run_graph_exact(p, seed, workers):
    variant = p["variant"]
    levels = [int(v) for v in p["levels"]]
    times = gr.corner_exit_times(variant, levels)
    rows = []
    for i, (lv, t) in enumerate(zip(levels, times)):
        ratio = float(t / times[i - 1]) if i else math.nan
        rows.append((lv, float(t), ratio))
    out = {"corner_exit_times.csv": _rows_csv(("level", "corner_exit_time", "ratio"), rows)}
    warns = []
    if len(levels) >= 2:
        factor = {"SG2": 2.0, "SG3": 3.0}.get(variant.upper(), 2.0)
        fit = gr.walk_dimension_from_ratios(times, factor)
        out["walk_dimension.csv"] = _rows_csv(("walk_dimension", "std_err", "n_levels"), [(fit.exponent, fit.std_err, fit.n_points)])

    def fig(ax):
        ax.semilogy(levels, times, "o-")
        ax.set_xlabel("level")
        ax.set_ylabel("corner exit time")

    return {"csv": out, "figures": [("corner_exit_times.png", fig)], "warnings": warns}


def run_criteria(p, seed, workers):
    verdicts = [crit.horn_trap_classifier(b, x_cap=p["horn_x_cap"]) for b in p["horn_b"]]
    verdicts += [crit.modified_koch_classifier(g, p["modified_koch_a"]) for g in p["modified_koch_gamma"]]
    corners = [(a, crit.corner_coefficient(math.radians(a))) for a in p["corner_angles_deg"]]
    koch = [
        (a, crit.koch_dimension(a), crit.koch_heat_exponent(a), crit.matching_fractional_order(a))
        for a in p["koch_alpha"]
    ]
    angles = [c[0] for c in corners]

    def fig(ax):
        ax.plot(angles, [c[1] for c in corners], "o-")
        ax.axhline(0.0, color="grey", lw=0.5)
        ax.set_xlabel("interior angle (deg)")
        ax.set_ylabel("corner coefficient")

    return {
        "csv": {
            "verdicts.csv": crit.verdicts_csv(verdicts),
            "corner_coefficients.csv": _rows_csv(("angle_deg", "coefficient"), corners),
            "koch_exponents.csv": _rows_csv(("alpha", "dimension", "heat_exponent", "matching_beta"), koch),
        },
        "figures": [("corner_coefficients.png", fig)],
        "warnings": [],
    }


def _expansion(p, beta):
    # leading boundary term plus the curvature or corner term; fractal boundaries have no such pair
    return (beta / 2.0, beta) if p["domain"] in ("disk", "square") else None


def _heat_outputs(hc, fit_window, label, expansion=None):
    loss = hc.area - hc.Q
    csvs = {
        "heat_content.csv": hc.to_csv(),
        "heat_loss.csv": _rows_csv(("t", "Q_loss", "std_err"), zip(hc.t.tolist(), loss.tolist(), hc.std_err.tolist())),
    }
    warns = list(hc.warnings)
    fit = None
    try:
        fit = est.heat_loss_exponent_fit(hc.t, hc.Q, hc.area, hc.std_err, window=fit_window)
        csvs["fit.csv"] = _fit_csv(fit)
        warns += list(fit.flags)
    except (FitError, est.EstimatorError) as exc:
        warns.append(f"fit skipped: {exc}")
    if expansion is not None:
        try:
            c, cse = est.expansion_coefficients(hc.t, loss, expansion, hc.std_err, window=fit_window)
            csvs["expansion.csv"] = _rows_csv(("exponent", "coefficient", "std_err"), zip(expansion, c.tolist(), cse.tolist()))
        except est.EstimatorError as exc:
            warns.append(f"expansion skipped: {exc}")

    def fig(ax):
        ok = loss > 0
        ax.errorbar(hc.t[ok], loss[ok], yerr=hc.std_err[ok], fmt="o", ms=3)
        if fit is not None:
            tt = np.geomspace(*fit.t_window, 50)
            ax.plot(tt, fit.coefficient * tt**fit.exponent, "-", label=f"slope {fit.exponent:.4f}")
            ax.legend()
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel(label)

    return {"csv": csvs, "figures": [("heat_loss.png", fig)], "warnings": warns}


def _heat_cfg(p, seed, workers):
    return P.PathConfig(
        h=p["h"], seed=seed, diffusivity=p["diffusivity"], adaptive=p["adaptive"],
        far_field=p["far_field"], workers=workers,
    )


def run_heat_content(p, seed, workers):
    _check_paths(p["n_samples"], "n_samples")
    dom = _domain(p)
    t = dyadic_grid(p["t_min"], p["t_max"], p["per_octave"])
    cfg = _heat_cfg(p, seed, workers)
    hc = est.heat_content_mc(dom, t, p["n_samples"], cfg)
    return {**_heat_outputs(hc, p["fit_window"], "heat loss", _expansion(p, 1.0)), "consumed": {"path_config": dataclasses.asdict(cfg)}}


def run_fractional_heat_content(p, seed, workers):
    _check_paths(p["n_samples"], "n_samples")
    dom = _domain(p)
    t = dyadic_grid(p["t_min"], p["t_max"], p["per_octave"])
    cfg = _heat_cfg(p, seed, workers)
    hc = est.fractional_heat_content_mc(dom, p["beta"], t, p["n_samples"], cfg)
    consumed = {"path_config": dataclasses.asdict(cfg), "clock_horizon": est.inverse_stable_horizon(p["beta"], float(t[-1]))}
    return {**_heat_outputs(hc, p["fit_window"], "fractional heat loss", _expansion(p, p["beta"])), "consumed": consumed}


def _scan_setup(p):
    kind = p["domain"]
    depths = [int(d) for d in p["depths"]]
    if kind == "square":
        dom = geo.unit_square()
        center = p["ball_center"] or [0.5, 0.5]
        radius = p["ball_radius"] or 0.1
        starts = [(str(k), (0.35 - 0.1 * k, 0.35 - 0.1 * k)) for k in depths]
    elif kind in ("koch", "walled"):
        dom = _domain(p)
        center = p["ball_center"] or [0.5, -math.sqrt(3.0) / 6.0]
        radius = p["ball_radius"] or 0.05
        starts = est.nested_depth_starts(dom, depths)
    else:
        raise ConfigError(f"trap-scan supports square, koch and walled, not {kind!r}")
    return dom, ((float(center[0]), float(center[1])), float(radius)), starts


def run_trap_scan(p, seed, workers):
    _check_paths(p["n_paths"])
    dom, ball, starts = _scan_setup(p)
    cfg = P.PathConfig(adaptive=True, seed=seed, diffusivity=p["diffusivity"], workers=workers)
    scan = est.trap_scan(
        dom, ball, starts, p["n_paths"], cfg, horizon=p["horizon"],
        ratio_threshold=p["ratio_threshold"], censor_limit=p["censor_limit"],
    )
    summary = _rows_csv(("classification", "rule", "n_paths"), [(scan.classification, scan.rule.replace(",", ";"), scan.n_paths)])
    x = np.arange(len(scan.depth_labels))

    def fig(ax):
        ax.errorbar(x, scan.mean_hitting_times, yerr=scan.std_errs, fmt="o-")
        hot = scan.censor_rates > 0
        ax.plot(x[hot], scan.mean_hitting_times[hot], "rx", ms=10, label="censored paths")
        ax.set_xticks(x, scan.depth_labels)
        ax.set_xlabel("depth")
        ax.set_ylabel("mean hitting time")
        ax.set_title(scan.classification)

    warns = [] if scan.classification != est.INCONCLUSIVE else [scan.rule]
    consumed = {
        "path_config": dataclasses.asdict(cfg),
        "ball": {"center": list(ball[0]), "radius": ball[1]},
        "starts": {label: [float(v) for v in pt] for label, pt in starts},
    }
    return {
        "csv": {"trap_scan.csv": scan.to_csv(), "classification.csv": summary},
        "figures": [("trap_scan.png", fig)],
        "warnings": warns,
        "consumed": consumed,
    }


def run_sticky_exit(p, seed, workers):
    _check_paths(p["n_paths"])
    bf = sub.make_bernstein(p["bernstein"])
    cfg = P.PathConfig(h=p["h"], seed=seed, diffusivity=p["diffusivity"], workers=workers)
    r = est.sticky_exit_mean(p["ell"], p["x0"], bf, p["eta_over_sigma"], p["n_paths"], cfg)
    summary = _rows_csv(
        ("bernstein", "estimate", "std_err", "closed_form", "status", "censor_rate"),
        [(sub.describe(bf), r.estimate, r.std_err, r.closed_form, r.status, r.censor_rate)],
    )
    trace = _rows_csv(("n_paths", "running_mean"), zip(r.trace_n.tolist(), r.trace_mean.tolist()))

    def fig(ax):
        ax.semilogx(r.trace_n, r.trace_mean, "o-")
        if math.isfinite(r.closed_form):
            ax.axhline(r.closed_form, color="grey", ls="--")
        ax.set_xlabel("paths")
        ax.set_ylabel("running mean exit time")
        ax.set_title(r.status)

    warns = [] if r.status == est.CONVERGED else ["running mean does not converge (infinite Phi'(0))"]
    return {
        "csv": {"sticky_exit.csv": summary, "running_mean.csv": trace},
        "figures": [("running_mean.png", fig)],
        "warnings": warns,
        "consumed": {"path_config": dataclasses.asdict(cfg)},
    }


def run_msd(p, seed, workers):
    _check_paths(p["n_paths"])
    kind = p["graph"]
    if kind.upper() in ("SG2", "SG3"):
        g = gr.build_sg_graph(kind.upper(), p["level"])
        start = 0
    elif kind == "path":
        n = 2 ** p["level"] * 16 + 1
        g = gr.build_path_graph(n, 1.0 / (n - 1))
        start = n // 2
    else:
        raise ConfigError(f"unknown graph {kind!r}")
    if p["mode"] == "walk":
        m = P.graph_walk_msd(g, start, p["n_steps"], p["n_paths"], seed=seed, workers=workers)
        burn = p["burn_in"]
    elif p["mode"] == "time-changed":
        tg = np.geomspace(p["t_min"], p["t_max"], p["t_points"])
        m = P.time_changed_walk_msd(g, start, p["alpha"], tg, p["n_paths"], seed=seed, workers=workers)
        burn = max(p["burn_in"], p["t_min"])
    else:
        raise ConfigError(f"unknown msd mode {p['mode']!r}")
    csvs = {"msd.csv": est.msd_csv(m.times, m.msd, m.std_err)}
    warns = []
    fit = None
    try:
        fit = est.msd_fit(m.times, m.msd, 1.0, m.std_err, burn_in=burn)
        csvs["fit.csv"] = _fit_csv(fit)
    except est.EstimatorError as exc:
        warns.append(f"fit skipped: {exc}")

    def fig(ax):
        ok = np.isfinite(m.msd) & (m.msd > 0)
        ax.errorbar(m.times[ok], m.msd[ok], yerr=m.std_err[ok], fmt="o", ms=3)
        if fit is not None:
            tt = np.geomspace(*fit.t_window, 50)
            ax.plot(tt, fit.coefficient * tt**fit.exponent, "-", label=f"slope {fit.exponent:.4f}")
            ax.legend()
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("steps" if p["mode"] == "walk" else "t")
        ax.set_ylabel("mean squared displacement")

    return {"csv": csvs, "figures": [("msd.png", fig)], "warnings": warns}


def run_subordinator_check(p, seed, workers):
    n = p["n_samples"]
    _check_paths(n, "n_samples")
    alpha = p["alpha"]
    rows = []
    gens = iter(np.random.default_rng(c) for c in np.random.SeedSequence([seed, 99]).spawn(64))
    L = sub.sample_inverse_stable_exact(alpha, 1.0, next(gens), n)
    for q in p["moment_orders"]:
        v = L**q
        rows.append({
            "quantity": "inverse_stable_moment", "params": f"alpha={alpha};q={q};t=1",
            "closed_form": sub.inverse_stable_moment(alpha, q, 1.0),
            "mc_estimate": float(v.mean()), "std_err": float(v.std(ddof=1) / math.sqrt(n)),
        })
    for spec in p["laplace"]:
        bf = sub.make_bernstein(spec)
        e = np.exp(-sub.sample_subordinator_increment(bf, 1.0, next(gens), size=n))
        rows.append({
            "quantity": "laplace_at_1", "params": sub.describe(bf),
            "closed_form": math.exp(-bf.phi(1.0)),
            "mc_estimate": float(e.mean()), "std_err": float(e.std(ddof=1) / math.sqrt(n)),
        })
    dt = p["derivative_step"]
    s = np.arange(0.0, 1.0 + 0.5 * dt, dt)
    bf = sub.Stable(alpha)
    rows.append({
        "quantity": "nonlocal_derivative_of_s", "params": f"{sub.describe(bf)};t=1;dt={dt}",
        "closed_form": 1.0 / math.gamma(2.0 - alpha),
        "mc_estimate": sub.nonlocal_derivative(s, dt, bf), "std_err": 0.0,
    })
    table = sub.oracle_table_csv(rows)
    labels = [f"{r['quantity']}\n{r['params']}" for r in rows]

    def fig(ax):
        rel = [(r["mc_estimate"] - r["closed_form"]) / max(r["std_err"], 1e-300) if r["std_err"] > 0 else 0.0 for r in rows]
        ax.barh(range(len(rows)), rel)
        ax.set_yticks(range(len(rows)), labels, fontsize=6)
        ax.axvline(-4, color="r", ls="--")
        ax.axvline(4, color="r", ls="--")
        ax.set_xlabel("(estimate - closed form) / std err")

    return {"csv": {"oracles.csv": table}, "figures": [("oracles.png", fig)], "warnings": []}


RUNNERS = {
    "geometry-export": run_geometry_export,
    "graph-exact": run_graph_exact,
    "criteria": run_criteria,
    "heat-content": run_heat_content,
    "fractional-heat-content": run_fractional_heat_content,
    "trap-scan": run_trap_scan,
    "sticky-exit": run_sticky_exit,
    "msd": run_msd,
    "subordinator-check": run_subordinator_check,
}


# --------------------------------------------------------------------------
# plot scripts

PLOT_COLUMNS = {
    "loglog": (("t",), ("Q_loss", "msd", "Q_hat"), ("std_err",)),
    "series": (("depth",), ("mean_TB",), ("std_err",), ("censor_rate",)),
}

_LOGLOG_TEMPLATE = '''"""Log-log plot with a least-squares power-law line."""
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

t = np.array({x!r})
y = np.array({y!r})
err = np.array({err!r})
ok = (t > 0) & (y > 0) & np.isfinite(y)
slope, icept = np.polyfit(np.log(t[ok]), np.log(y[ok]), 1)
fig, ax = plt.subplots()
ax.errorbar(t[ok], y[ok], yerr=err[ok], fmt="o", ms=3, label="data")
ax.plot(t[ok], np.exp(icept) * t[ok] ** slope, "-", label=f"slope {{slope:.4f}}")
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("t")
ax.set_ylabel({ycol!r})
ax.annotate(f"slope = {{slope:.4f}}", xy=(0.05, 0.9), xycoords="axes fraction")
ax.legend()
fig.savefig({out!r}, dpi=150)
'''

_SERIES_TEMPLATE = '''"""Mean hitting time against depth; red crosses flag censored depths."""
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

depth = {x!r}
mean = np.array({y!r})
err = np.array({err!r})
censor = np.array({cens!r})
pos = np.arange(len(depth))
fig, ax = plt.subplots()
ax.errorbar(pos, mean, yerr=err, fmt="o-")
hot = censor > 0
ax.plot(pos[hot], mean[hot], "rx", ms=10, label="censored")
for i, c in enumerate(censor):
    ax.annotate(f"{{c:.1%}}", (pos[i], mean[i]), textcoords="offset points", xytext=(4, 4), fontsize=7)
ax.set_xticks(pos, depth)
ax.set_xlabel("depth")
ax.set_ylabel("mean hitting time")
fig.savefig({out!r}, dpi=150)
'''


def emit_plot_script(result_csv, kind: str) -> str:
    """Matplotlib script text for a result CSV; data are embedded so the script stands alone."""
    if kind not in PLOT_COLUMNS:
        raise ConfigError(f"plot kind must be one of {sorted(PLOT_COLUMNS)}")
    path = Path(result_csv)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        rows = list(reader)
    picked = []
    for options in PLOT_COLUMNS[kind]:
        col = next((c for c in options if c in header), None)
        if col is None:
            raise ConfigError(f"{path.name}: missing column {options[0]!r} (have {', '.join(header) or 'none'})")
        picked.append(col)
    out = str(path.with_suffix(".plot.png"))
    num = lambda c: [float(r[c]) for r in rows]
    if kind == "loglog":
        return _LOGLOG_TEMPLATE.format(x=num(picked[0]), y=num(picked[1]), err=num(picked[2]), ycol=picked[1], out=out)
    return _SERIES_TEMPLATE.format(
        x=[r[picked[0]] for r in rows], y=num(picked[1]), err=num(picked[2]), cens=num(picked[3]), out=out,
    )


def _plot_kind(header: list[str]):
    for kind, groups in PLOT_COLUMNS.items():
        if all(any(c in header for c in g) for g in groups):
            return kind
    return None


# --------------------------------------------------------------------------
# driver


def _render(fig_fn, target: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    try:
        fig_fn(ax)
        fig.tight_layout()
        fig.savefig(target, dpi=120, metadata={"Software": None})
    finally:
        plt.close(fig)


def _write_text(path: Path, text: str) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run(config: dict, figures: bool = True) -> dict:
    """Execute a resolved config; returns the manifest (also written to disk)."""
    out = Path(config["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc)
    t0 = time.perf_counter()
    res = RUNNERS[config["experiment"]](config["params"], config["seed"], config["workers"])
    warns = list(res.get("warnings", []))
    for name, text in res["csv"].items():
        _write_text(out / name, text)
        kind = _plot_kind(text.split("\n", 1)[0].split(","))
        if kind:
            _write_text(out / (Path(name).stem + "_plot.py"), emit_plot_script(out / name, kind))
    for name, text in res.get("files", {}).items():
        _write_text(out / name, text)
    if figures:
        for name, fn in res.get("figures", []):
            try:
                _render(fn, out / name)
            except Exception as exc:  # a broken figure must not lose the CSVs
                warns.append(f"figure {name} failed: {exc}")
    if res.get("consumed"):
        config = {**config, "module_params": res["consumed"]}
    manifest = {
        "config": config,
        "seed": config["seed"],
        "version": __version__,
        "started_at": started.isoformat(timespec="seconds"),
        "runtime_seconds": round(time.perf_counter() - t0, 3),
        "warnings": warns,
    }
    _write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


_MODULE_OF = {
    "GeometryError": "geometry", "ReflectionCapError": "geometry",
    "GraphError": "prefractal_graphs",
    "SubordinationError": "subordination", "RefinementCapError": "subordination",
    "PathError": "paths", "CriteriaError": "criteria",
    "EstimatorError": "estimators", "FitError": "estimators",
    "ConfigError": "cli",
}


def error_record(exc: BaseException) -> dict:
    name = type(exc).__name__
    return {
        "status": "error",
        "error": name,
        "module": _MODULE_OF.get(name, "cli"),
        "message": str(exc),
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="traplab", description="Trap-domain diffusion experiments.")
    ap.add_argument("--version", action="version", version=f"traplab {__version__}")
    sp = ap.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sp.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (0 .. 2^64-1)")
        p.add_argument("--workers", type=int, help="worker threads")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="set a param (repeatable)")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        cfg = load_config(args.experiment, args.config, args.override, args.seed, args.workers, out)
        out = Path(cfg["out_dir"])
        manifest = run(cfg, figures=not args.no_figures)
    except Exception as exc:
        rec = error_record(exc)
        if isinstance(exc, (ConfigError, OSError)):
            code = EXIT_SCHEMA if isinstance(exc, ConfigError) else EXIT_RUNTIME
        else:
            code = EXIT_RUNTIME
            rec["traceback"] = traceback.format_exception_only(type(exc), exc)[-1].strip()
        if out is not None:
            try:
                Path(out).mkdir(parents=True, exist_ok=True)
                _write_text(Path(out) / "error.json", json.dumps(rec, indent=2) + "\n")
            except OSError:
                pass
        print(json.dumps(rec), file=sys.stderr)
        return code
    print(json.dumps({"status": "ok", "out_dir": str(out), "runtime_seconds": manifest["runtime_seconds"], "warnings": manifest["warnings"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
