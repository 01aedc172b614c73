"""Trajectory engines: killed and reflected Brownian motion in planar domains,
1-d reflected motion with its local time, the sticky clock
V(s) = s + H((eta/sigma) g_s) with its inverse, inverse-subordinator time
changes and random walks on graphs.

Brownian motion here has generator D * Laplacian (increments sqrt(2 D h) N);
D = 1/2 gives standard Brownian motion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _geomkern as gk
from . import _pathkern as pk
from . import geometry as geo
from .parallel import DEFAULT_BATCH, batch_generators, batch_sizes, run_batches
from .subordination import Identity, Stable, sample_subordinator_increment

STATUS_NAMES = {pk.EXITED: "exited", pk.ALIVE: "alive", pk.CENSORED: "censored", pk.REFLECT_CAP: "reflect_cap"}
SUBGRID_RATIO = 1.0 / 16.0

_EMPTY_REC = np.zeros((0, 3))


class PathError(ValueError):
    pass


@dataclass(frozen=True)
class PathConfig:
    """Step control and seeding for every trajectory engine.

    ``adaptive`` switches from fixed steps h to steps sized by the distance to
    the nearest obstacle, ``((d / step_factor)**2) / (2 D)``, clipped to
    [h_min, h_max].
    """

    h: float = 1e-4
    max_steps: int = 10_000_000
    seed: int = 0
    diffusivity: float = 1.0
    bridge: bool = True
    adaptive: bool = False
    step_factor: float = 3.0
    h_min: float = 1e-9
    h_max: float = 1e-2
    far_field: float = 12.0
    max_reflect: int = geo.REFLECT_MAX_ITER
    batch_size: int = DEFAULT_BATCH
    workers: int = 1

    def __post_init__(self):
        if not self.h > 0 or not math.isfinite(self.h):
            raise PathError("step h must be positive")
        if self.max_steps < 1:
            raise PathError("max_steps must be positive")
        if not self.diffusivity > 0:
            raise PathError("diffusivity must be positive")
        if not (0 < self.h_min <= self.h_max):
            raise PathError("need 0 < h_min <= h_max")
        if self.batch_size < 1 or self.workers < 1:
            raise PathError("batch_size and workers must be positive")

    @property
    def horizon(self) -> float:
        return self.h * self.max_steps


@dataclass(frozen=True)
class PathSample:
    exit_time: float  # math.inf when censored or still alive at the horizon
    exit_point: geo.Point
    local_time: float = 0.0
    status: str = "exited"
    positions: np.ndarray | None = None  # rows (t, x, y), or (t, X, g) when dim == 1
    dim: int = 2

    @property
    def censored(self) -> bool:
        return self.status == "censored"


@dataclass(frozen=True)
class PathBatch:
    """Columnar results of many independent paths."""

    exit_time: np.ndarray
    exit_x: np.ndarray
    exit_y: np.ndarray
    status: np.ndarray
    local_time: np.ndarray | None = None

    def __len__(self):
        return len(self.exit_time)

    @property
    def exited(self) -> np.ndarray:
        return self.status == pk.EXITED

    @property
    def censor_rate(self) -> float:
        return float(np.mean(self.status == pk.CENSORED)) if len(self) else 0.0

    @classmethod
    def concat(cls, parts) -> "PathBatch":
        parts = list(parts)
        lt = None if parts[0].local_time is None else np.concatenate([p.local_time for p in parts])
        return cls(
            np.concatenate([p.exit_time for p in parts]),
            np.concatenate([p.exit_x for p in parts]),
            np.concatenate([p.exit_y for p in parts]),
            np.concatenate([p.status for p in parts]),
            lt,
        )


def _rng_from(cfg: PathConfig, rng) -> np.random.Generator:
    if rng is None:
        return batch_generators(cfg.seed, 1)[0]
    return rng


# --------------------------------------------------------------------------
# domain plumbing


def _kernel_domain(domain, segs_override=None):
    """(kind, segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell)."""
    dummy = (np.zeros((1, 4)), 0.0, 0.0, 1.0, 1, 1, np.zeros(2, dtype=np.int64), np.zeros(1, dtype=np.int64))
    if isinstance(domain, geo.Disk):
        return (pk.DISK, *dummy, float(domain.center[0]), float(domain.center[1]), float(domain.radius), 0.0)
    if isinstance(domain, geo.Interval):
        return (pk.INTERVAL, *dummy, 0.0, 0.0, 0.0, float(domain.ell))
    if isinstance(domain, geo.Polygon):
        idx = domain.index if segs_override is None else geo.SegmentIndex.from_segments(segs_override)
        return (pk.POLYGON, *idx, 0.0, 0.0, 0.0, 0.0)
    raise PathError(f"unsupported domain {type(domain).__name__}")


def _check_start(domain, x0) -> geo.Point:
    if isinstance(domain, geo.Interval):
        x = float(x0[0]) if np.ndim(x0) else float(x0)
        if not 0.0 <= x <= domain.ell:
            raise PathError(f"start {x} outside [0, {domain.ell}]")
        return geo.Point(x, 0.0)
    p = geo.as_point(x0)
    if not (geo.contains(domain, p) or geo.boundary_distance(domain, p) == 0.0):
        raise PathError(f"start {tuple(p)} is not in the domain")
    return p


def _check_starts(domain, s: np.ndarray) -> None:
    """Every start must lie in the closed domain."""
    if isinstance(domain, geo.Interval):
        bad = (s[:, 0] < 0.0) | (s[:, 0] > domain.ell)
    elif isinstance(domain, geo.Disk):
        bad = np.hypot(s[:, 0] - domain.center[0], s[:, 1] - domain.center[1]) > domain.radius
    else:
        v = domain.vertices
        bad = np.array([not gk.point_in_ring(x, y, v) for x, y in s], dtype=bool)
        if bad.any():
            # ray casting is ambiguous exactly on edges, which are admitted
            d = np.empty(len(s))
            kd = _kernel_domain(domain)
            pk.distances_kernel(kd[0], s[:, 0].copy(), s[:, 1].copy(), *kd[1:], d)
            bad &= d > 0.0
    if bad.any():
        i = int(np.argmax(bad))
        raise PathError(f"start {tuple(s[i])} is not in the domain")


def _starts_array(starts) -> np.ndarray:
    s = np.asarray(starts, dtype=float)
    if s.ndim == 1:
        s = np.column_stack([s, np.zeros_like(s)])
    return np.ascontiguousarray(s)


# --------------------------------------------------------------------------
# killed Brownian motion


def killed_exit_batch(domain, starts, cfg: PathConfig, rng: np.random.Generator, t_max: float = math.inf, _kd=None) -> PathBatch:
    """Pure batch: exit times of killed BM from each start (status alive past t_max)."""
    s = _starts_array(starts)
    n = len(s)
    kd = _kernel_domain(domain) if _kd is None else _kd
    out_t = np.empty(n)
    out_x = np.empty(n)
    out_y = np.empty(n)
    out_s = np.empty(n, dtype=np.int8)
    if cfg.adaptive and not math.isfinite(t_max):
        raise PathError("adaptive killed paths need a finite horizon")
    pk.killed_kernel(
        kd[0], s[:, 0].copy(), s[:, 1].copy(), *kd[1:],
        cfg.diffusivity, cfg.h, cfg.adaptive, cfg.step_factor, cfg.h_min, float(t_max),
        cfg.max_steps, cfg.bridge, cfg.far_field, rng, out_t, out_x, out_y, out_s, _EMPTY_REC, 0,
    )
    out_t = np.where(out_s == pk.EXITED, out_t, math.inf)
    return PathBatch(out_t, out_x, out_y, out_s)


def killed_exit_times(domain, starts, cfg: PathConfig, t_max: float = math.inf, stream: int = 0) -> PathBatch:
    """Parallel wrapper over fixed-size batches seeded from cfg.seed."""
    s = _starts_array(starts)
    _check_starts(domain, s)
    sizes = batch_sizes(len(s), cfg.batch_size)
    gens = batch_generators(cfg.seed, len(sizes), stream)
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    kd = _kernel_domain(domain)
    tasks = [(s[offs[k] : offs[k + 1]], gens[k]) for k in range(len(sizes))]
    parts = run_batches(lambda a: killed_exit_batch(domain, a[0], cfg, a[1], t_max, kd), tasks, cfg.workers)
    if not parts:
        return PathBatch(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int8))
    return PathBatch.concat(parts)


def simulate_killed_exit(domain, x0, cfg: PathConfig, rng=None, record_every: int = 0, max_record: int = 100_000) -> PathSample:
    """One killed path; exit_time is a multiple of h in fixed-step mode."""
    p = _check_start(domain, x0)
    kd = _kernel_domain(domain)
    rec = np.zeros((max_record if record_every else 0, 3))
    out_t, out_x, out_y = np.empty(1), np.empty(1), np.empty(1)
    out_s = np.empty(1, dtype=np.int8)
    nrec = pk.killed_kernel(
        kd[0], np.array([p.x]), np.array([p.y]), *kd[1:],
        cfg.diffusivity, cfg.h, cfg.adaptive, cfg.step_factor, cfg.h_min, cfg.horizon if cfg.adaptive else math.inf,
        cfg.max_steps, cfg.bridge, cfg.far_field, _rng_from(cfg, rng), out_t, out_x, out_y, out_s, rec, record_every,
    )
    status = STATUS_NAMES[int(out_s[0])]
    et = float(out_t[0]) if out_s[0] == pk.EXITED else math.inf
    return PathSample(et, geo.Point(float(out_x[0]), float(out_y[0])), 0.0, status, rec[:nrec] if record_every else None)


def dump_path_csv(sample: PathSample) -> str:
    """Rows (step, x, y, local_time) of a recorded path."""
    if sample.positions is None:
        raise PathError("path was not recorded")
    lines = ["step,x,y,local_time"]
    for k, (_, a, b) in enumerate(sample.positions):
        if sample.dim == 1:
            lines.append(f"{k},{float(a)!r},0.0,{float(b)!r}")
        else:
            lines.append(f"{k},{float(a)!r},{float(b)!r},0.0")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# reflected Brownian motion


@dataclass(frozen=True, eq=False)
class ReflectedSetup:
    """Compiled obstacle data for reflected paths in one domain."""

    kd: tuple
    feat: np.ndarray
    zones: np.ndarray  # rows (zx, zy, tx, ty, nx, ny, r_in, log_den)


def reflected_setup(domain, subgrid_ratio: float = SUBGRID_RATIO) -> ReflectedSetup:
    """Segments, per-segment step floors and sub-grid opening zones.

    Openings narrower than ``subgrid_ratio * a`` are closed geometrically and
    replaced by a zone of radius a/8 around the passage centre where a capacity
    model decides whether the path slips through.
    """
    if not isinstance(domain, geo.Polygon):
        # the boundary is smooth, so a step floor well below its length scale is safe
        scale = domain.radius if isinstance(domain, geo.Disk) else domain.ell
        return ReflectedSetup(_kernel_domain(domain), np.array([scale / 64.0]), np.zeros((0, 8)))
    segs = [domain.edges]
    gaps = [np.full(len(domain.edges), np.inf)]
    zones = []
    if isinstance(domain, geo.WalledSnowflake):
        for op in domain.openings:
            n = np.asarray(op.normal)
            tvec = np.array([-n[1], n[0]])
            c = np.asarray(op.center)
            x = c - 0.5 * op.a * tvec
            y = c + 0.5 * op.a * tvec
            if op.log_width >= math.log(op.a):
                continue
            if op.log_width >= math.log(subgrid_ratio * op.a):
                w = op.width
                segs.append(np.array([[*x, *(c - 0.5 * w * tvec)], [*(c + 0.5 * w * tvec), *y]]))
                gaps.append(np.array([w, w]))
            else:
                segs.append(np.array([[*x, *y]]))
                gaps.append(np.array([np.inf]))
                r_in = op.a / 8.0
                log_den = math.log(2.0 * r_in) - (op.log_width - math.log(4.0))
                zones.append([c[0], c[1], tvec[0], tvec[1], n[0], n[1], r_in, log_den])
    elif len(domain.walls):
        segs.append(domain.walls.reshape(-1, 4))
        gaps.append(np.full(len(domain.walls), np.inf))
    segs = np.concatenate(segs)
    gaps = np.concatenate(gaps)
    lengths = np.hypot(segs[:, 2] - segs[:, 0], segs[:, 3] - segs[:, 1])
    feat = np.minimum(lengths, gaps) / 8.0
    kd = _kernel_domain(domain, segs)
    return ReflectedSetup(kd, np.ascontiguousarray(feat), np.array(zones, dtype=float).reshape(-1, 8))


def reflected_batch(setup: ReflectedSetup, starts, cfg: PathConfig, rng: np.random.Generator, horizon: float, target=None) -> PathBatch:
    """Pure batch of reflected paths run to the target ball or ``horizon``."""
    s = _starts_array(starts)
    n = len(s)
    if target is None:
        bx, by, br = 0.0, 0.0, -1.0
    else:
        (bx, by), br = target
    out_t = np.empty(n)
    out_x = np.empty(n)
    out_y = np.empty(n)
    out_s = np.empty(n, dtype=np.int8)
    kd = setup.kd
    pk.reflected_kernel(
        kd[0], s[:, 0].copy(), s[:, 1].copy(), *kd[1:9], setup.feat, *kd[9:],
        float(bx), float(by), float(br), setup.zones, cfg.diffusivity, cfg.h, cfg.adaptive, cfg.step_factor,
        cfg.h_min, cfg.h_max, float(horizon), cfg.max_steps, cfg.max_reflect, rng, out_t, out_x, out_y, out_s,
    )
    if np.any(out_s == pk.REFLECT_CAP):
        i = int(np.argmax(out_s == pk.REFLECT_CAP))
        raise geo.ReflectionCapError(
            f"reflection did not settle near ({out_x[i]:.6g}, {out_y[i]:.6g}); reduce the step size"
        )
    if target is not None:
        out_t = np.where(out_s == pk.EXITED, out_t, math.inf)
    return PathBatch(out_t, out_x, out_y, out_s)


def hitting_times(domain, starts, target, cfg: PathConfig, horizon: float = math.inf, stream: int = 0, setup=None) -> PathBatch:
    """First hitting times of the target ball by reflected BM, batched in parallel."""
    setup = reflected_setup(domain) if setup is None else setup
    s = _starts_array(starts)
    _check_starts(domain, s)
    sizes = batch_sizes(len(s), cfg.batch_size)
    gens = batch_generators(cfg.seed, len(sizes), stream)
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    tasks = [(s[offs[k] : offs[k + 1]], gens[k]) for k in range(len(sizes))]
    parts = run_batches(lambda a: reflected_batch(setup, a[0], cfg, a[1], horizon, target), tasks, cfg.workers)
    return PathBatch.concat(parts)


def simulate_reflected(domain, x0, T: float, cfg: PathConfig, rng=None, target=None) -> PathSample:
    """Reflected path up to T, stopped early at the target ball ((cx, cy), r) if given."""
    p = _check_start(domain, x0)
    if T > cfg.horizon * (1 + 1e-12) and not cfg.adaptive:
        raise PathError("T exceeds h * max_steps")
    b = reflected_batch(reflected_setup(domain), [[p.x, p.y]], cfg, _rng_from(cfg, rng), T, target)
    st = STATUS_NAMES[int(b.status[0])]
    return PathSample(float(b.exit_time[0]), geo.Point(float(b.exit_x[0]), float(b.exit_y[0])), 0.0, st)


# --------------------------------------------------------------------------
# 1-d reflected motion and local time


def local_time_batch(x0s, ell: float, cfg: PathConfig, rng: np.random.Generator, t_max: float = math.inf) -> PathBatch:
    """Reflected BM on [0, ell) absorbed at ell: (tau, g at tau) per start."""
    x0s = np.ascontiguousarray(x0s, dtype=float)
    n = len(x0s)
    out_t = np.empty(n)
    out_x = np.empty(n)
    out_g = np.empty(n)
    out_s = np.empty(n, dtype=np.int8)
    pk.local_time_kernel(
        x0s, float(ell), cfg.diffusivity, cfg.h, float(t_max), cfg.max_steps, cfg.bridge, rng,
        out_t, out_x, out_g, out_s, _EMPTY_REC, 0,
    )
    return PathBatch(out_t, out_x, np.zeros(n), out_s, out_g)


def local_time_exits(x0: float, ell: float, n_paths: int, cfg: PathConfig, stream: int = 0) -> PathBatch:
    sizes = batch_sizes(n_paths, cfg.batch_size)
    gens = batch_generators(cfg.seed, len(sizes), stream)
    tasks = list(zip(sizes, gens))
    parts = run_batches(lambda a: local_time_batch(np.full(a[0], float(x0)), ell, cfg, a[1]), tasks, cfg.workers)
    return PathBatch.concat(parts)


def reflected_1d_with_local_time(
    x0: float, T: float, cfg: PathConfig, rng=None, ell: float = math.inf, record_every: int = 1,
) -> PathSample:
    """Reflected BM from x0 >= 0 with local time at 0, up to T or absorption at ell.

    ``positions`` rows are (t, X, g) every ``record_every`` steps.
    """
    if not x0 >= 0:
        raise PathError("x0 must be nonnegative")
    n_rec = int(min(T, cfg.horizon) / cfg.h / max(record_every, 1)) + 2 if record_every else 0
    rec = np.zeros((n_rec, 3))
    out_t, out_x, out_g = np.empty(1), np.empty(1), np.empty(1)
    out_s = np.empty(1, dtype=np.int8)
    nrec = pk.local_time_kernel(
        np.array([float(x0)]), float(ell), cfg.diffusivity, cfg.h, float(T), cfg.max_steps, cfg.bridge,
        _rng_from(cfg, rng), out_t, out_x, out_g, out_s, rec, record_every,
    )
    st = STATUS_NAMES[int(out_s[0])]
    et = float(out_t[0]) if out_s[0] == pk.EXITED else math.inf
    return PathSample(et, geo.Point(float(out_x[0]), 0.0), float(out_g[0]), st, rec[:nrec] if record_every else None, dim=1)


# --------------------------------------------------------------------------
# sticky clock


@dataclass(frozen=True)
class StickyClock:
    s: np.ndarray
    V: np.ndarray
    eta_over_sigma: float

    def __post_init__(self):
        if len(self.s) != len(self.V) or len(self.s) < 1:
            raise PathError("clock grid and values must align")

    def V_inverse(self, t):
        """Generalised inverse on the grid: V_inverse(V(s_k)) = s_k, linear drift between grid points."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.V, t, side="right") - 1
        k = np.clip(k, 0, len(self.s) - 1)
        ds = np.diff(self.s, append=self.s[-1] + (self.s[-1] - self.s[-2] if len(self.s) > 1 else 0.0))
        out = self.s[k] + np.clip(t - self.V[k], 0.0, ds[k])
        return float(out) if out.ndim == 0 else out


def sticky_evaluate(base: PathSample, bf, eta_over_sigma: float, rng: np.random.Generator) -> StickyClock:
    """Sticky clock along a recorded local-time path (rows (t, X, g))."""
    if base.positions is None or base.positions.shape[1] < 3:
        raise PathError("base path must carry a recorded local-time path")
    if not eta_over_sigma > 0:
        raise PathError("eta_over_sigma must be positive")
    s = base.positions[:, 0]
    g = np.maximum.accumulate(base.positions[:, 2])
    dg = np.diff(eta_over_sigma * g, prepend=0.0)
    H = np.cumsum(np.where(dg > 0, sample_subordinator_increment(bf, np.maximum(dg, 0.0), rng), 0.0))
    return StickyClock(s.copy(), s + H, float(eta_over_sigma))


def sticky_exit_values(tau, g_tau, bf, eta_over_sigma: float, rng: np.random.Generator) -> np.ndarray:
    """V(tau) = tau + H((eta/sigma) g_tau), one subordinator draw per path."""
    tau = np.asarray(tau, dtype=float)
    return tau + np.asarray(sample_subordinator_increment(bf, eta_over_sigma * np.asarray(g_tau, dtype=float), rng))


def inverse_clock_samples(
    bf, eta_over_sigma: float, t: float, n_paths: int, cfg: PathConfig, x0: float = 0.0, stream: int = 0,
) -> np.ndarray:
    """Samples of V^{-1}_t for reflected BM started at x0 (no absorption)."""
    n_steps = int(math.ceil(t / cfg.h))
    sizes = batch_sizes(n_paths, min(cfg.batch_size, max(1, 2_000_000 // (n_steps + 1))))
    gens = batch_generators(cfg.seed, len(sizes), stream)

    def one(task):
        m, gen = task
        g = np.empty((m, n_steps + 1))
        pk.local_time_grid_kernel(float(x0), cfg.diffusivity, cfg.h, n_steps, gen, g)
        s = cfg.h * np.arange(n_steps + 1)
        dg = np.diff(eta_over_sigma * g, axis=1)
        H = np.zeros_like(g)
        pos = dg > 0
        inc = np.zeros_like(dg)
        inc[pos] = sample_subordinator_increment(bf, dg[pos], gen)
        H[:, 1:] = np.cumsum(inc, axis=1)
        V = s[None, :] + H
        out = np.empty(m)
        for i in range(m):
            out[i] = StickyClock(s, V[i], eta_over_sigma).V_inverse(t)
        return out

    return np.concatenate(run_batches(one, list(zip(sizes, gens)), cfg.workers))


# --------------------------------------------------------------------------
# inverse-subordinator time change


def time_changed_eval(base_exit: PathSample, bf, t_grid, rng: np.random.Generator) -> np.ndarray:
    """Survival indicators {H_zeta > t} of the time-changed lifetime on ``t_grid``."""
    if not math.isfinite(base_exit.exit_time):
        raise PathError("base path has no finite exit time")
    return time_changed_survival(np.array([base_exit.exit_time]), bf, t_grid, rng)[0]


def time_changed_survival(exit_times, bf, t_grid, rng: np.random.Generator) -> np.ndarray:
    """Boolean matrix [path, t] of {H_zeta > t}; paths alive past the horizon count as infinite."""
    z = np.asarray(exit_times, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    fin = np.isfinite(z)
    Hz = np.full(z.shape, math.inf)
    if isinstance(bf, Identity):
        Hz[fin] = z[fin]
    elif fin.any():
        Hz[fin] = sample_subordinator_increment(bf, z[fin], rng)
    return Hz[:, None] > t_grid[None, :]


# --------------------------------------------------------------------------
# graph walks


def _dyadic_steps(n_steps: int) -> np.ndarray:
    if n_steps < 0:
        raise PathError("n_steps must be nonnegative")
    if n_steps == 0:
        return np.zeros(1, dtype=np.int64)
    k = int(math.floor(math.log2(n_steps)))
    return np.concatenate([[0], 2 ** np.arange(k + 1)]).astype(np.int64)


def _walk(g, start: int, targets: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if g.coords is None:
        raise PathError("graph has no coordinates")
    indptr, indices = g.csr()
    out = np.empty(targets.shape)
    pk.walk_kernel(indptr, indices, np.ascontiguousarray(g.coords[:, 0]), np.ascontiguousarray(g.coords[:, 1]),
                   int(start), np.ascontiguousarray(targets, dtype=np.int64), rng, out)
    return out


@dataclass(frozen=True)
class MSDSeries:
    times: np.ndarray
    msd: np.ndarray
    std_err: np.ndarray


def graph_walk_msd(g, start: int, n_steps: int, n_paths: int, seed: int = 0, workers: int = 1, batch: int = 256) -> MSDSeries:
    """Mean squared displacement of the simple random walk at dyadic step counts."""
    steps = _dyadic_steps(n_steps)
    sizes = batch_sizes(n_paths, batch)
    gens = batch_generators(seed, len(sizes))
    parts = run_batches(lambda a: _walk(g, start, np.tile(steps, (a[0], 1)), a[1]), list(zip(sizes, gens)), workers)
    sq = np.concatenate(parts)
    return MSDSeries(steps.astype(float), sq.mean(axis=0), sq.std(axis=0, ddof=1) / math.sqrt(n_paths))


def time_changed_walk_msd(
    g, start: int, alpha: float, t_grid, n_paths: int, seed: int = 0, workers: int = 1,
    batch: int = 256, step_cap: int = 2**22,
) -> MSDSeries:
    """MSD of the walk run on the clock L_t of an alpha-stable subordinator.

    One positive stable variable per path gives L_t = (t / S)**alpha for every t
    (exact marginals by self-similarity); the walk is observed at floor(L_t) steps.
    Observations beyond ``step_cap`` are dropped and counted.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    sizes = batch_sizes(n_paths, batch)
    gens = batch_generators(seed, len(sizes))

    def one(a):
        m, gen = a
        S = sample_subordinator_increment(Stable(alpha), 1.0, gen, size=m)
        L = np.floor((t_grid[None, :] / S[:, None]) ** alpha)
        tg = np.where(L <= step_cap, L, -1).astype(np.int64)
        return _walk(g, start, tg, gen)

    sq = np.concatenate(run_batches(one, list(zip(sizes, gens)), workers))
    ok = np.isfinite(sq)
    cnt = ok.sum(axis=0)
    mean = np.where(cnt > 0, np.nansum(sq, axis=0) / np.maximum(cnt, 1), np.nan)
    sd = np.sqrt(np.nansum((sq - mean) ** 2, axis=0) / np.maximum(cnt - 1, 1))
    return MSDSeries(t_grid, mean, sd / np.sqrt(np.maximum(cnt, 1)))
