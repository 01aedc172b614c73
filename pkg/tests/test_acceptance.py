"""End-to-end acceptance checks, one test per criterion, at the stated tolerances."""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from traplab import cli
from traplab import criteria as crit
from traplab import estimators as est
from traplab import geometry as geo
from traplab import graphs as gr
from traplab import paths as P
from traplab import subordination as sub
from traplab.fitting import dyadic_grid

SEED = 20240611
KOCH_EDGE = 3.0**-4


def record(num, title, ok, detail, elapsed, budget):
    within = elapsed <= budget
    ACCEPTANCE.append((num, title, ok and within, f"{detail}; {elapsed:.1f}s of {budget:.0f}s"))
    assert ok, detail
    assert within, f"runtime {elapsed:.1f}s exceeds {budget}s"


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def test_01_inverse_stable_moments():
    t0 = time.perf_counter()
    L, _ = sub.sample_inverse_at(sub.Stable(0.5), 1.0, np.random.default_rng(SEED), size=100_000)
    m1, s1 = mean_se(L)
    m15, s15 = mean_se(L**1.5)
    e1 = 2.0 / math.sqrt(math.pi)
    e15 = math.gamma(2.5) / math.gamma(1.75)
    ok = abs(m1 - e1) <= 4 * s1 and abs(m15 - e15) <= 4 * s15
    detail = f"E L = {m1:.5f} (exact {e1:.5f}, {abs(m1 - e1) / s1:.1f} se); E L^1.5 = {m15:.5f} (exact {e15:.5f}, {abs(m15 - e15) / s15:.1f} se)"
    record(1, "inverse-stable moments", ok, detail, time.perf_counter() - t0, 60)


def test_02_subordinator_laplace():
    t0 = time.perf_counter()
    parts, ok = [], True
    for k, bf in enumerate([sub.Stable(0.5), sub.Gamma(1.0, 1.0), sub.TemperedStable(0.5, 1.0)]):
        x = np.exp(-sub.sample_subordinator_increment(bf, 1.0, np.random.default_rng([SEED, k]), size=100_000))
        m, se = mean_se(x)
        exact = math.exp(-bf.phi(1.0))
        ok &= abs(m - exact) < 4 * se
        parts.append(f"{sub.describe(bf)} {abs(m - exact) / se:.1f} se")
    record(2, "subordinator Laplace transforms", ok, "; ".join(parts), time.perf_counter() - t0, 60)


def test_03_nonlocal_derivative():
    t0 = time.perf_counter()
    dt = 1e-4
    s = np.arange(0.0, 1.0 + dt / 2, dt)
    d = sub.nonlocal_derivative(s, dt, sub.Stable(0.5))
    exact = 1.0 / math.gamma(1.5)
    err_id = max(
        abs(sub.nonlocal_derivative(s, dt, sub.Identity()) - 1.0),
        abs(sub.nonlocal_derivative(s * s + s, dt, sub.Identity()) - 3.0),
    )
    ok = abs(d - exact) < 1e-3 and err_id < 1e-8
    record(3, "non-local derivative", ok, f"|D s - 1/Gamma(1.5)| = {abs(d - exact):.2e}; identity error {err_id:.1e}", time.perf_counter() - t0, 10)


def test_04_gasket_exactness():
    t0 = time.perf_counter()
    levels = range(6)
    tabs = []
    for n in levels:
        g = gr.build_sg_graph("SG2", n)
        a0, a1, a2 = g.corners
        tabs.append(gr.mean_exit_time_exact(g, {a1, a2}))
    times = np.array([tab[gr.build_sg_graph("SG2", n).corners[0]] for n, tab in zip(levels, tabs)])
    res = max(tab.residual for tab in tabs)
    dw = gr.walk_dimension_from_ratios(times, 2.0).exponent
    sg3 = gr.corner_exit_times("SG3", range(5))
    ratio = sg3[4] / sg3[3]
    ok = (
        np.allclose(times, 5.0 ** np.arange(6), rtol=1e-10)
        and res <= 1e-10
        and abs(dw - math.log(5) / math.log(2)) < 1e-12
        and abs(ratio - 90.0 / 7.0) < 1e-6
    )
    detail = f"max residual {res:.1e}; d_w error {abs(dw - math.log(5) / math.log(2)):.1e}; SG3 ratio {ratio:.9f}"
    record(4, "gasket exactness", ok, detail, time.perf_counter() - t0, 120)


def test_05_sticky_exit():
    t0 = time.perf_counter()
    cfg = P.PathConfig(h=1e-4, seed=SEED)
    g = est.sticky_exit_mean(1.0, 0.0, sub.Gamma(1.0, 1.0), 1.0, 10_000, cfg)
    s = est.sticky_exit_mean(1.0, 0.0, sub.Stable(0.5), 1.0, 10_000, cfg)
    early = s.trace_mean[s.trace_n <= 16].max()
    late = s.trace_mean[s.trace_n >= 1024].max()
    ok = (
        abs(g.estimate - 1.5) <= 4 * g.std_err
        and g.status == est.CONVERGED
        and s.status == est.NON_CONVERGENT
        and late > 10 * early
        and late > 100 * g.closed_form
    )
    detail = f"Gamma mean {g.estimate:.4f} +- {g.std_err:.4f}; Stable running mean {early:.3g} -> {late:.3g} ({s.status})"
    record(5, "sticky exit means", ok, detail, time.perf_counter() - t0, 180)


def test_06_inverse_clock_moment():
    t0 = time.perf_counter()
    cfg = P.PathConfig(h=1e-4, seed=SEED)
    ok, parts = True, []
    for k, t in enumerate((0.25, 1.0, 4.0)):
        c = est.inverse_clock_moment(0.5, 0.25, 1.0, 1.0, t, 4000, cfg, stream=k)
        ok &= c.lower - 2 * c.std_err <= c.mean_ratio <= c.upper + 2 * c.std_err
        parts.append(f"t={t:g}: {c.mean_ratio:.4f} in [{c.lower:.3f}, 1]")
    record(6, "inverse sticky-clock moments", ok, "; ".join(parts), time.perf_counter() - t0, 300)


def test_07_disk_heat_content():
    t0 = time.perf_counter()
    cfg = P.PathConfig(adaptive=True, seed=SEED, far_field=10.0)
    hc = est.heat_content_mc(geo.Disk(1.0), dyadic_grid(1e-5, 1e-3, 2), 100_000, cfg)
    fit = est.heat_loss_exponent_fit(hc.t, hc.Q, hc.area, hc.std_err, window=(1e-5, 1e-3))
    target = 4.0 * math.sqrt(math.pi)
    ok = abs(fit.exponent - 0.5) <= 0.02 and abs(fit.coefficient / target - 1) <= 0.07
    detail = f"exponent {fit.exponent:.4f}; coefficient {fit.coefficient:.3f} vs {target:.3f} ({100 * (fit.coefficient / target - 1):+.1f}%)"
    record(7, "disk heat content", ok, detail, time.perf_counter() - t0, 300)


def test_08_square_corner_term():
    t0 = time.perf_counter()
    cfg = P.PathConfig(adaptive=True, seed=SEED, far_field=10.0, h_min=1e-8)
    hc = est.heat_content_mc(geo.unit_square(), dyadic_grid(1e-3, 0.04, 2), 100_000, cfg)
    sel = (hc.t >= 1.4e-3) & (hc.t <= 0.032)
    t = hc.t[sel]
    # residual after the perimeter term, fitted as c t through the origin
    y = 8.0 / math.sqrt(math.pi) * np.sqrt(t) - hc.loss[sel]
    w = 1.0 / hc.std_err[sel] ** 2
    coef = float(np.sum(w * y * t) / np.sum(w * t * t))
    target = 4.0 * crit.corner_coefficient(math.pi / 2)
    ok = abs(coef / target - 1.0) <= 0.20
    record(8, "square corner term", ok, f"coefficient {coef:.3f} vs {target:.3f} ({100 * (coef / target - 1):+.1f}%)", time.perf_counter() - t0, 300)


@pytest.fixture(scope="module")
def koch_fit():
    t0 = time.perf_counter()
    cfg = P.PathConfig(adaptive=True, seed=SEED, far_field=10.0, h_min=1e-8)
    lo, hi = KOCH_EDGE**2, 81 * KOCH_EDGE**2
    hc = est.heat_content_mc(geo.build_koch_snowflake(3.0, 4), dyadic_grid(lo, hi, 2), 100_000, cfg)
    fit = est.heat_loss_exponent_fit(hc.t, hc.Q, hc.area, hc.std_err, window=(lo, hi * (1 + 1e-9)))
    return fit, time.perf_counter() - t0


def test_09_koch_exponent(koch_fit):
    fit, elapsed = koch_fit
    target = crit.koch_heat_exponent(3.0)
    ok = abs(fit.exponent - target) <= 0.05
    record(9, "Koch heat-loss exponent", ok, f"exponent {fit.exponent:.4f} +- {fit.std_err:.4f} vs {target:.4f}", elapsed, 600)


def test_10_fractional_disk(koch_fit):
    t0 = time.perf_counter()
    cfg = P.PathConfig(adaptive=True, seed=SEED, far_field=10.0)
    t = dyadic_grid(1e-9, 1e-5, 2)
    hc = est.fractional_heat_content_mc(geo.Disk(1.0), 0.5, t, 100_000, cfg)
    fit = est.heat_loss_exponent_fit(hc.t, hc.Q, hc.area, hc.std_err)
    # leading coefficient from the two-term expansion c t^(1/4) + c2 t^(1/2)
    (coef, _), (coef_se, _) = est.expansion_coefficients(hc.t, hc.area - hc.Q, (0.25, 0.5), hc.std_err)
    target = 2.0 * math.pi / math.gamma(1.25)
    beta = crit.matching_fractional_order(3.0)
    hm = est.fractional_heat_content_mc(geo.Disk(1.0), beta, t, 100_000, cfg)
    fm = est.heat_loss_exponent_fit(hm.t, hm.Q, hm.area, hm.std_err)
    koch = koch_fit[0].exponent
    tol = math.hypot(0.05, 0.03)
    ok = abs(fit.exponent - 0.25) <= 0.03 and abs(coef / target - 1) <= 0.10 and abs(fm.exponent - koch) <= tol
    detail = (
        f"beta=0.5 exponent {fit.exponent:.4f}, coefficient {coef:.3f} +- {coef_se:.3f} vs {target:.3f}; "
        f"beta={beta:.4f} exponent {fm.exponent:.4f} vs Koch {koch:.4f} (tol {tol:.3f})"
    )
    record(10, "fractional disk heat content", ok, detail, time.perf_counter() - t0, 300)


def test_11_trap_scans():
    t0 = time.perf_counter()
    cfg = P.PathConfig(adaptive=True, seed=SEED)
    ball = ((0.5, -math.sqrt(3.0) / 6.0), 0.05)
    cases = [
        ("Koch alpha=3", geo.build_koch_snowflake(3.0, 3), ball, [0, 1, 2, 3], est.BOUNDED),
        ("walled gamma=2.5", geo.build_walled_snowflake(3.0, 2, 2.5), ball, [0, 1, 2], est.GROWING),
        ("walled gamma=1.5", geo.build_walled_snowflake(3.0, 3, 1.5), ball, [0, 1, 2, 3], est.BOUNDED),
        ("unit square", geo.unit_square(), ((0.5, 0.5), 0.1), [0, 1, 2, 3], est.BOUNDED),
    ]
    ok, parts = True, []
    for name, dom, b, depths, want in cases:
        if isinstance(dom, geo.KochSnowflake):
            starts = est.nested_depth_starts(dom, depths)
        else:
            starts = [(str(k), (0.35 - 0.1 * k, 0.35 - 0.1 * k)) for k in depths]
        s = est.trap_scan(dom, b, starts, 300, cfg, horizon=50.0)
        good = s.classification == want and float(s.censor_rates.max()) < 0.10
        ok &= good
        ratio = s.mean_hitting_times[-1] / s.mean_hitting_times[0]
        parts.append(f"{name} {s.classification} (ratio {ratio:.2f})")
    record(11, "trap scans", ok, "; ".join(parts), time.perf_counter() - t0, 900)


def test_12_classifiers():
    t0 = time.perf_counter()
    horn = [crit.horn_trap_classifier(b).verdict for b in (1.0, 2.0, 3.0)]
    koch = [crit.modified_koch_classifier(g, 1.0 / 3.0).verdict for g in (1.5, 2.0, 3.0)]
    c_pi = crit.corner_coefficient(math.pi)
    c_half = crit.corner_coefficient(math.pi / 2)
    ok = (
        horn == [crit.TRAP, crit.TRAP, crit.NON_TRAP]
        and koch == [crit.NON_TRAP, crit.TRAP, crit.TRAP]
        and abs(c_pi) < 1e-12
        and abs(c_half - 4.0 / math.pi) < 1e-8
    )
    detail = f"horn {horn}; modified Koch {koch}; c(pi) = {c_pi:.1e}; c(pi/2) - 4/pi = {c_half - 4 / math.pi:.1e}"
    record(12, "criteria classifiers", ok, detail, time.perf_counter() - t0, 10)


def test_13_msd_exponents():
    t0 = time.perf_counter()
    g = gr.build_sg_graph("SG2", 8)
    m = P.graph_walk_msd(g, 0, 2**16, 2000, seed=SEED)
    f_sg = est.msd_fit(m.times, m.msd, 1.0, m.std_err)
    n = 2**12 + 1
    line = gr.build_path_graph(n, 1.0 / (n - 1))
    m1 = P.graph_walk_msd(line, n // 2, 2**16, 2000, seed=SEED)
    f_1 = est.msd_fit(m1.times, m1.msd, 1.0, m1.std_err)
    tg = np.geomspace(1e2, 1e9, 29)
    mt = P.time_changed_walk_msd(g, 0, 0.5, tg, 2000, seed=SEED)
    f_t = est.msd_fit(mt.times, mt.msd, 1.0, mt.std_err, burn_in=1e2)
    ok = abs(f_sg.exponent - 0.861) <= 0.05 and abs(f_1.exponent - 1.0) <= 0.03 and abs(f_t.exponent - 0.431) <= 0.05
    detail = f"SG2 {f_sg.exponent:.4f}; path {f_1.exponent:.4f}; time-changed {f_t.exponent:.4f}"
    record(13, "MSD exponents", ok, detail, time.perf_counter() - t0, 600)


def test_14_reproducibility(tmp_path):
    t0 = time.perf_counter()
    runs = [
        ("trap-scan", ["domain=\"walled\"", "level=2", "depths=[0,1,2]", "n_paths=100"]),
        ("fractional-heat-content", ["n_samples=20000"]),
        ("sticky-exit", ["n_paths=4000"]),
        ("msd", ["mode=\"time-changed\"", "level=6", "n_paths=500"]),
        ("subordinator-check", ["n_samples=20000"]),
    ]
    ok, same = True, 0
    for exp, ov in runs:
        dirs = []
        for w in (1, 4):
            out = tmp_path / f"{exp}-{w}"
            args = [exp, "--seed", str(SEED), "--workers", str(w), "--out", str(out), "--no-figures"]
            for o in ov:
                args += ["--override", o]
            ok &= cli.main(args) == 0
            dirs.append(out)
        for f in sorted(dirs[0].glob("*.csv")):
            eq = f.read_bytes() == (dirs[1] / f.name).read_bytes()
            ok &= eq
            same += eq
    record(14, "reproducibility across workers", ok, f"{same} CSV files byte-identical at workers 1 and 4", time.perf_counter() - t0, 900)
