"""Monte Carlo estimators: heat content and its fractional analogue, heat-loss
exponent fits, trap scans over nested starting depths, sticky exit means,
inverse sticky-clock moments and MSD fits.
"""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _pathkern as pk
from . import geometry as geo
from . import paths as P
from .fitting import FitError, FitResult, fit_power_law
from .parallel import batch_generators
from .subordination import Identity, Stable, sample_subordinator_increment, sticky_inverse_moment_constant

GROWING = "Growing"
BOUNDED = "Bounded"
INCONCLUSIVE = "Inconclusive"
CONVERGED = "Converged"
NON_CONVERGENT = "NonConvergent"


class EstimatorError(ValueError):
    pass


# --------------------------------------------------------------------------
# heat content


@dataclass(frozen=True)
class HeatContent:
    t: np.ndarray
    Q: np.ndarray
    std_err: np.ndarray
    area: float
    n_paths: int
    n_uniform: int
    censor_rate: float
    warnings: tuple = ()

    @property
    def loss(self) -> np.ndarray:
        return self.area - self.Q

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,Q_hat,std_err\n")
        for t, q, s in zip(self.t, self.Q, self.std_err):
            buf.write(f"{float(t)!r},{float(q)!r},{float(s)!r}\n")
        return buf.getvalue()


def domain_area(domain) -> float:
    if isinstance(domain, (geo.Disk, geo.Polygon, geo.Interval)):
        return float(domain.area)
    raise EstimatorError(f"no area for {type(domain).__name__}")


def boundary_distances(domain, pts) -> np.ndarray:
    pts = np.ascontiguousarray(pts, dtype=float)
    kd = P._kernel_domain(domain)
    out = np.empty(len(pts))
    pk.distances_kernel(kd[0], pts[:, 0].copy(), pts[:, 1].copy(), *kd[1:], out)
    return out


def _layer_starts(domain, n: int, width: float, rng: np.random.Generator, chunk: int = 200_000):
    """n uniform points within ``width`` of the boundary and the number of uniform draws spent."""
    got = []
    have = 0
    drawn = 0
    while have < n:
        pts = geo.sample_uniform(domain, chunk, rng)
        d = boundary_distances(domain, pts)
        keep = pts[d < width]
        need = n - have
        if len(keep) >= need:
            # count draws only up to the point where the n-th layer point appeared
            idx = np.nonzero(d < width)[0][need - 1]
            drawn += idx + 1
            got.append(keep[:need])
            have = n
        else:
            drawn += chunk
            got.append(keep)
            have += len(keep)
    return np.concatenate(got), drawn


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise EstimatorError("t_grid must be a strictly increasing sequence of nonnegative times")
    return t


def _survival_table(exit_or_clock: np.ndarray, t: np.ndarray, n_uniform: int, area: float):
    """Q and its binomial standard error from per-path lifetimes (interior paths never die)."""
    deaths = (exit_or_clock[:, None] <= t[None, :]).sum(axis=0)
    p = deaths / n_uniform
    Q = area * (1.0 - p)
    se = area * np.sqrt(np.maximum(p * (1.0 - p), 0.0) / n_uniform)
    return Q, se


def heat_content_mc(domain, t_grid, n_samples: int, cfg: P.PathConfig, rng: np.random.Generator | None = None) -> HeatContent:
    """Q(t) = |D| * fraction of uniform starts whose killed path survives past t.

    Starts farther than ``cfg.far_field * sqrt(D t_max)`` from the boundary
    are counted as survivors without simulation.
    """
    t = _check_grid(t_grid)
    t_max = float(t[-1])
    if not cfg.adaptive and t_max > cfg.horizon:
        raise EstimatorError("t_grid exceeds h * max_steps")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    area = domain_area(domain)
    width = cfg.far_field * math.sqrt(cfg.diffusivity * t_max) if t_max > 0 else 0.0
    starts, n_uniform = _layer_starts(domain, n_samples, width, rng)
    batch = P.killed_exit_times(domain, starts, cfg, t_max=t_max)
    Q, se = _survival_table(batch.exit_time, t, n_uniform, area)
    Q = np.where(t == 0, area, Q)
    se = np.where(t == 0, 0.0, se)
    warn = []
    cr = batch.censor_rate
    if cr > 0.01:
        warn.append(f"censoring rate {cr:.3%} exceeds 1% at t={t_max:g}")
    return HeatContent(t, Q, se, area, len(starts), int(n_uniform), cr, tuple(warn))


def inverse_stable_horizon(beta: float, t_max: float, log_tail: float = 16.0) -> float:
    """zeta with P(L_{t_max} > zeta) ~ exp(-log_tail) for the inverse beta-stable clock."""
    if not 0 < beta < 1:
        raise EstimatorError("beta must lie in (0, 1)")
    c = (1.0 - beta) * beta ** (beta / (1.0 - beta))
    s_q = (c / log_tail) ** ((1.0 - beta) / beta)
    return (t_max / s_q) ** beta


def fractional_heat_content_mc(
    domain, beta: float, t_grid, n_samples: int, cfg: P.PathConfig, rng: np.random.Generator | None = None, bf=None,
) -> HeatContent:
    """Q^beta(t) = |D| * P(H_zeta > t) with one beta-stable draw per killed path."""
    t = _check_grid(t_grid)
    bf = Stable(beta) if bf is None else bf
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    if isinstance(bf, Identity):
        horizon = float(t[-1])
    else:
        horizon = inverse_stable_horizon(beta, float(t[-1]))
    area = domain_area(domain)
    width = cfg.far_field * math.sqrt(cfg.diffusivity * horizon)
    starts, n_uniform = _layer_starts(domain, n_samples, width, rng)
    batch = P.killed_exit_times(domain, starts, cfg, t_max=horizon)
    sub_rng = batch_generators(cfg.seed, 1, stream=7)[0]
    z = batch.exit_time
    Hz = np.full(len(z), math.inf)
    fin = np.isfinite(z)
    Hz[fin] = z[fin] if isinstance(bf, Identity) else sample_subordinator_increment(bf, z[fin], sub_rng)
    Q, se = _survival_table(Hz, t, n_uniform, area)
    Q = np.where(t == 0, area, Q)
    se = np.where(t == 0, 0.0, se)
    warn = []
    if batch.censor_rate > 0.01:
        warn.append(f"censoring rate {batch.censor_rate:.3%} exceeds 1%")
    return HeatContent(t, Q, se, area, len(starts), int(n_uniform), batch.censor_rate, tuple(warn))


def heat_loss_exponent_fit(t, Q_hat, area: float, std_err=None, window=None) -> FitResult:
    """Weighted log-log fit of area - Q against t; exponent estimates beta/2."""
    t = np.asarray(t, dtype=float)
    Q_hat = np.asarray(Q_hat, dtype=float)
    se = None if std_err is None else np.asarray(std_err, dtype=float)
    sel = t > 0
    if window is not None:
        sel &= (t >= window[0]) & (t <= window[1])
    t, Q_hat = t[sel], Q_hat[sel]
    se = None if se is None else se[sel]
    if len(t) < 4:
        raise EstimatorError("need at least four grid points")
    if np.any(Q_hat >= area):
        raise EstimatorError("every Q must lie below the area")
    flags = []
    noise = 2.0 * (se if se is not None else np.zeros_like(Q_hat))
    if np.any(np.diff(Q_hat) > noise[1:] + noise[:-1]):
        flags.append(INCONCLUSIVE)
    fit = fit_power_law(t, area - Q_hat, sigma=se, min_points=4)
    return FitResult(fit.exponent, fit.coefficient, fit.std_err, fit.r_squared, fit.t_window, fit.n_points, tuple(flags))


def expansion_coefficients(t, loss, exponents, std_err=None, window=None) -> tuple[np.ndarray, np.ndarray]:
    """Weighted least squares of loss against sum_k c_k t**exponents[k].

    Returns (c, se). With the exponents known, the leading coefficient is
    read at the scale of the data instead of being extrapolated to t = 1.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(loss, dtype=float)
    se = np.ones_like(t) if std_err is None else np.asarray(std_err, dtype=float)
    sel = t > 0
    if window is not None:
        sel &= (t >= window[0]) & (t <= window[1])
    t, y, se = t[sel], y[sel], se[sel]
    ex = np.asarray(exponents, dtype=float)
    if len(t) < len(ex) + 2:
        raise EstimatorError("too few grid points for the expansion")
    if np.any(se <= 0):
        raise EstimatorError("standard errors must be positive")
    A = t[:, None] ** ex[None, :] / se[:, None]
    coef, *_ = np.linalg.lstsq(A, y / se, rcond=None)
    cov = np.linalg.inv(A.T @ A)
    if std_err is None:
        dof = len(t) - len(ex)
        cov *= float(np.sum((A @ coef - y / se) ** 2)) / dof
    return coef, np.sqrt(np.diag(cov))


# --------------------------------------------------------------------------
# trap scan


@dataclass(frozen=True)
class TrapScan:
    depth_labels: tuple
    mean_hitting_times: np.ndarray
    std_errs: np.ndarray
    censor_rates: np.ndarray
    classification: str
    rule: str = ""
    n_paths: int = 0

    def __post_init__(self):
        n = len(self.depth_labels)
        if not (len(self.mean_hitting_times) == len(self.std_errs) == len(self.censor_rates) == n):
            raise EstimatorError("trap scan arrays must have equal length")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("depth,mean_TB,std_err,censor_rate\n")
        for d, m, s, c in zip(self.depth_labels, self.mean_hitting_times, self.std_errs, self.censor_rates):
            buf.write(f"{d},{float(m)!r},{float(s)!r},{float(c)!r}\n")
        return buf.getvalue()


def classify_trend(means, censor_rates, ratio_threshold: float = 5.0, rho_min: float = 0.8, censor_limit: float = 0.2):
    means = np.asarray(means, dtype=float)
    if np.any(np.asarray(censor_rates) > censor_limit) or not np.all(np.isfinite(means)):
        return INCONCLUSIVE, f"censor rate above {censor_limit:.0%}"
    ratio = means[-1] / means[0] if means[0] > 0 else math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = stats.spearmanr(np.arange(len(means)), means).statistic if len(means) > 1 else 0.0
    rho = 0.0 if not np.isfinite(rho) else float(rho)
    growing = ratio > ratio_threshold and rho >= rho_min
    rule = f"last/first = {ratio:.3g} (threshold {ratio_threshold}); spearman rho = {rho:.2f} (min {rho_min})"
    return (GROWING if growing else BOUNDED), rule


def trap_scan(
    domain, target_ball, start_points, n_paths: int, cfg: P.PathConfig, horizon: float = 50.0,
    ratio_threshold: float = 5.0, censor_limit: float = 0.2,
) -> TrapScan:
    """Mean hitting time of the target ball by reflected BM from each labelled start.

    ``start_points`` is a sequence of (label, (x, y)); depth k uses seed stream k.
    """
    (bx, by), br = target_ball
    if not geo.contains(domain, (bx, by)):
        raise EstimatorError("target ball centre must lie in the domain")
    if geo.boundary_distance(domain, (bx, by)) <= br:
        raise EstimatorError("target ball must be disjoint from the boundary and walls")
    setup = P.reflected_setup(domain)
    labels, means, ses, crs = [], [], [], []
    for k, (label, pt) in enumerate(start_points):
        if not geo.contains(domain, pt):
            raise EstimatorError(f"start {label} is not in the domain")
        starts = np.tile(np.asarray(pt, dtype=float), (n_paths, 1))
        b = P.hitting_times(domain, starts, ((bx, by), br), cfg, horizon=horizon, stream=k, setup=setup)
        ok = b.exited
        cr = 1.0 - float(ok.mean())
        tt = b.exit_time[ok]
        labels.append(label)
        means.append(float(tt.mean()) if len(tt) else math.nan)
        ses.append(float(tt.std(ddof=1) / math.sqrt(len(tt))) if len(tt) > 1 else math.nan)
        crs.append(cr)
    cls, rule = classify_trend(means, crs, ratio_threshold, censor_limit=censor_limit)
    return TrapScan(tuple(labels), np.array(means), np.array(ses), np.array(crs), cls, rule, n_paths)


def nested_depth_starts(domain: geo.KochSnowflake, depths) -> list:
    """Start points for a depth scan: depth 0 mirrors the first level-1 bump
    centroid into the base triangle; depth k is the centroid of the level-k
    bump on a nested chain."""
    bumps = domain.bumps
    if not bumps:
        raise EstimatorError("snowflake has no bumps")
    chain = [0]
    while True:
        here = bumps[chain[-1]]
        kids = [i for i, b in enumerate(bumps) if b.parent == chain[-1] and b.level == here.level + 1]
        if not kids:
            break
        chain.append(kids[0])
    out = []
    for d in depths:
        if d == 0:
            b = bumps[0]
            m = 0.5 * (b.base[0] + b.base[1])
            c = b.centroid
            out.append(("0", tuple(2 * m - c)))
        else:
            if d > len(chain):
                raise EstimatorError(f"depth {d} exceeds the pre-fractal level")
            out.append((str(d), tuple(bumps[chain[d - 1]].centroid)))
    return out


# --------------------------------------------------------------------------
# sticky exits and clock moments


@dataclass(frozen=True)
class StickyExit:
    estimate: float
    std_err: float
    closed_form: float
    status: str
    trace_n: np.ndarray = field(default_factory=lambda: np.zeros(0))
    trace_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    censor_rate: float = 0.0


def sticky_exit_closed_form(ell: float, x0: float, phi_prime0: float, eta_over_sigma: float, diffusivity: float = 1.0) -> float:
    return (ell**2 - x0**2) / (2.0 * diffusivity) + eta_over_sigma * phi_prime0 * (ell - x0)


def sticky_exit_mean(ell: float, x0: float, bf, eta_over_sigma: float, n_paths: int, cfg: P.PathConfig) -> StickyExit:
    """Mean of V(tau_ell) for reflected BM on [0, ell) with the sticky clock."""
    if not 0 <= x0 <= ell:
        raise EstimatorError("need 0 <= x0 <= ell")
    pp = bf.phi_prime_at_zero
    closed = sticky_exit_closed_form(ell, x0, pp, eta_over_sigma, cfg.diffusivity)
    if x0 == ell:
        return StickyExit(0.0, 0.0, 0.0, CONVERGED)
    b = P.local_time_exits(x0, ell, n_paths, cfg)
    rng = batch_generators(cfg.seed, 1, stream=11)[0]
    ok = b.exited
    V = P.sticky_exit_values(b.exit_time[ok], b.local_time[ok], bf, eta_over_sigma, rng)
    n = len(V)
    ns = 2 ** np.arange(0, int(math.log2(max(n, 1))) + 1)
    run = np.cumsum(V)[ns - 1] / ns
    est = float(V.mean())
    se = float(V.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    status = CONVERGED if math.isfinite(pp) else NON_CONVERGENT
    return StickyExit(est, se, closed, status, ns.astype(float), run, 1.0 - float(ok.mean()))


@dataclass(frozen=True)
class ClockMoment:
    t: float
    mean_ratio: float
    std_err: float
    lower: float
    upper: float
    constant: float


def inverse_clock_moment(
    alpha: float, beta: float, theta: float, eta_over_sigma: float, t: float, n_paths: int, cfg: P.PathConfig, stream: int = 0,
) -> ClockMoment:
    """MC E[(V^{-1}_t / t)^theta] under a beta-stable clock, with the bound
    [1 - C t^(beta (1/(2 alpha) - 1)), 1]."""
    v = P.inverse_clock_samples(Stable(beta), eta_over_sigma, t, n_paths, cfg, stream=stream)
    r = (v / t) ** theta
    C = sticky_inverse_moment_constant(alpha, beta, theta, eta_over_sigma)
    lower = 1.0 - C * t ** (beta * (1.0 / (2.0 * alpha) - 1.0))
    return ClockMoment(t, float(r.mean()), float(r.std(ddof=1) / math.sqrt(len(r))), lower, 1.0, C)


# --------------------------------------------------------------------------
# MSD


def msd_fit(times, msd, diameter: float, std_err=None, burn_in: float = 8.0, min_points: int = 4) -> FitResult:
    """Log-log slope of MSD past ``burn_in``, dropping points with MSD > diameter^2 / 4."""
    times = np.asarray(times, dtype=float)
    msd = np.asarray(msd, dtype=float)
    sel = (times >= burn_in) & (msd > 0) & (msd <= diameter**2 / 4.0) & np.isfinite(msd)
    if sel.sum() < min_points:
        raise EstimatorError(f"MSD fit window has {int(sel.sum())} points, need {min_points}")
    se = None if std_err is None else np.asarray(std_err, dtype=float)[sel]
    try:
        return fit_power_law(times[sel], msd[sel], sigma=se, min_points=min_points)
    except FitError as exc:
        raise EstimatorError(str(exc)) from exc


def msd_csv(times, msd, std_err) -> str:
    buf = io.StringIO()
    buf.write("t,msd,std_err\n")
    for t, m, s in zip(times, msd, std_err):
        buf.write(f"{float(t)!r},{float(m)!r},{float(s)!r}\n")
    return buf.getvalue()
