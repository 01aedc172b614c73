"""Bernstein functions, subordinator and inverse-subordinator sampling,
closed-form moment oracles, the convolution derivative and Mittag-Leffler
evaluation.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class SubordinationError(ValueError):
    pass


class RefinementCapError(SubordinationError):
    pass


# --------------------------------------------------------------------------
# Bernstein catalog


@dataclass(frozen=True)
class Stable:
    """Phi(lambda) = lambda**alpha."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise SubordinationError("stable index must lie in (0, 1)")

    def phi(self, lam):
        return np.power(lam, self.alpha)

    def tail(self, z):
        return np.power(z, -self.alpha) / math.gamma(1.0 - self.alpha)

    def tail_integral(self, z):
        return np.power(z, 1.0 - self.alpha) / math.gamma(2.0 - self.alpha)

    @property
    def phi_prime_at_zero(self) -> float:
        return math.inf


@dataclass(frozen=True)
class Gamma:
    """Phi(lambda) = a log(1 + lambda / b)."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise SubordinationError("gamma subordinator needs a > 0, b > 0")

    def phi(self, lam):
        return self.a * np.log1p(np.asarray(lam, dtype=float) / self.b)

    def tail(self, z):
        return self.a * special.exp1(self.b * np.asarray(z, dtype=float))

    def tail_integral(self, z):
        x = self.b * np.asarray(z, dtype=float)
        with np.errstate(invalid="ignore"):
            zt = np.where(x > 0, np.asarray(z, dtype=float) * self.tail(np.where(x > 0, z, 1.0)), 0.0)
        return zt - self.a * np.expm1(-x) / self.b

    @property
    def phi_prime_at_zero(self) -> float:
        return self.a / self.b


@dataclass(frozen=True)
class TemperedStable:
    """Phi(lambda) = (lambda + theta)**alpha - theta**alpha."""

    alpha: float
    theta: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0 or not self.theta > 0:
            raise SubordinationError("tempered stable needs alpha in (0, 1), theta > 0")

    def phi(self, lam):
        return np.power(np.asarray(lam, dtype=float) + self.theta, self.alpha) - self.theta**self.alpha

    def tail(self, z):
        a, th = self.alpha, self.theta
        x = th * np.asarray(z, dtype=float)
        g = math.gamma(1.0 - a)
        return th**a / g * (np.power(x, -a) * np.exp(-x) - g * special.gammaincc(1.0 - a, x))

    def tail_integral(self, z):
        a, th = self.alpha, self.theta
        z = np.asarray(z, dtype=float)
        x = th * z
        safe = np.where(z > 0, z, 1.0)
        zt = np.where(z > 0, safe * self.tail(safe), 0.0)
        return zt + a * th ** (a - 1.0) * special.gammainc(1.0 - a, x)

    @property
    def phi_prime_at_zero(self) -> float:
        return self.alpha * self.theta ** (self.alpha - 1.0)


@dataclass(frozen=True)
class Identity:
    """Phi(lambda) = lambda: pure unit drift, no jumps."""

    def phi(self, lam):
        return np.asarray(lam, dtype=float) * 1.0

    def tail(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def tail_integral(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    @property
    def phi_prime_at_zero(self) -> float:
        return 1.0


BernsteinFunction = Stable | Gamma | TemperedStable | Identity


def make_bernstein(spec: dict) -> BernsteinFunction:
    """Build from a mapping like {"kind": "stable", "alpha": 0.5}."""
    spec = dict(spec)
    kind = str(spec.pop("kind", "")).lower().replace("-", "_")
    table = {"stable": Stable, "gamma": Gamma, "tempered_stable": TemperedStable, "temperedstable": TemperedStable, "identity": Identity}
    if kind not in table:
        raise SubordinationError(f"unknown Bernstein function kind {kind!r}")
    try:
        return table[kind](**spec)
    except TypeError as exc:
        raise SubordinationError(str(exc)) from exc


def phi(bf: BernsteinFunction, lam: float) -> float:
    if np.any(np.asarray(lam) < 0):
        raise SubordinationError("phi is defined for lambda >= 0")
    return bf.phi(lam)


def describe(bf: BernsteinFunction) -> str:
    if isinstance(bf, Stable):
        return f"stable(alpha={bf.alpha})"
    if isinstance(bf, Gamma):
        return f"gamma(a={bf.a};b={bf.b})"
    if isinstance(bf, TemperedStable):
        return f"tempered_stable(alpha={bf.alpha};theta={bf.theta})"
    return "identity"


# --------------------------------------------------------------------------
# sampling


def _stable_unit(alpha: float, rng: np.random.Generator, size) -> np.ndarray:
    """Positive stable variables with E exp(-lambda S) = exp(-lambda**alpha) (Kanter)."""
    u = np.pi * rng.random(size)
    e = rng.standard_exponential(size)
    a = alpha
    return (np.sin(a * u) / np.sin(u) ** (1.0 / a)) * (np.sin((1.0 - a) * u) / e) ** ((1.0 - a) / a)


def sample_subordinator_increment(bf: BernsteinFunction, t, rng: np.random.Generator, size=None):
    """Draw H_t (one per entry of ``t`` when it is an array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise SubordinationError("subordinator time must be nonnegative")
    shape = t_arr.shape if size is None else size
    t_arr = np.broadcast_to(t_arr, shape)
    if isinstance(bf, Identity):
        out = np.array(t_arr, dtype=float)
    elif isinstance(bf, Stable):
        out = np.power(t_arr, 1.0 / bf.alpha) * _stable_unit(bf.alpha, rng, shape)
    elif isinstance(bf, Gamma):
        out = np.where(t_arr > 0, rng.gamma(np.where(t_arr > 0, bf.a * t_arr, 1.0), 1.0 / bf.b), 0.0)
    elif isinstance(bf, TemperedStable):
        out = _tempered_stable(bf, t_arr, rng)
    else:
        raise SubordinationError(f"unsupported Bernstein function {bf!r}")
    if np.ndim(out) == 0:
        return float(out)
    return out


def _tempered_stable(bf: TemperedStable, t: np.ndarray, rng) -> np.ndarray:
    """Exponential tilting by rejection from the stable law.

    Each draw is split into n equal pieces so the acceptance rate
    exp(-t theta**alpha / n) stays above exp(-1/2).
    """
    a, th = bf.alpha, bf.theta
    flat = np.ravel(t)
    out = np.zeros(flat.shape)
    npieces = np.maximum(1, np.ceil(2.0 * flat * th**a)).astype(np.int64)
    for k in np.unique(npieces):
        idx = np.nonzero(npieces == k)[0]
        tau = np.repeat(flat[idx] / k, k)
        acc = np.zeros(tau.shape)
        todo = np.arange(len(tau))
        while len(todo):
            x = np.power(tau[todo], 1.0 / a) * _stable_unit(a, rng, len(todo))
            ok = rng.random(len(todo)) < np.exp(-th * x)
            acc[todo[ok]] = x[ok]
            todo = todo[~ok]
        out[idx] = acc.reshape(-1, k).sum(axis=1)
    return out.reshape(t.shape)


def _first_passage_on_grid(bf, t: float, delta: float, rng, n: int, block: int = 256, max_steps: int = 10**8):
    """Walk H on the grid k*delta until it exceeds t.

    Returns (k, H at step k) for every sample; L_t lies in ((k-1) delta, k delta].
    """
    k_out = np.zeros(n, dtype=np.int64)
    h_out = np.zeros(n)
    alive = np.arange(n)
    level = np.zeros(n)
    steps = 0
    while len(alive):
        inc = sample_subordinator_increment(bf, delta, rng, size=(len(alive), block))
        path = level[alive, None] + np.cumsum(inc, axis=1)
        over = path > t
        hit = over.any(axis=1)
        first = np.argmax(over, axis=1)
        ids = alive[hit]
        k_out[ids] = steps + first[hit] + 1
        h_out[ids] = path[hit, first[hit]]
        level[alive] = path[:, -1]
        alive = alive[~hit]
        steps += block
        if steps > max_steps:
            raise RefinementCapError("subordinator path did not pass the level")
    return k_out, h_out


def sample_inverse_at(
    bf: BernsteinFunction,
    t: float,
    rng: np.random.Generator,
    size: int | None = None,
    tol: float = 2e-3,
    delta: float | None = None,
    pilot: int = 4000,
    max_refinements: int = 14,
):
    """Sample (L_t, H at passage) by first passage of a gridded subordinator path.

    The grid step is halved, on coupled pilot paths, until the mean passage
    time moves by less than tol/2; the returned L is the cell midpoint.
    """
    if not t > 0:
        raise SubordinationError("t must be positive")
    n = 1 if size is None else int(size)
    if isinstance(bf, Identity):
        L = np.full(n, float(t))
        H = np.full(n, float(t))
    else:
        if delta is None:
            delta = choose_inverse_step(bf, t, rng, tol=tol, pilot=pilot, max_refinements=max_refinements)
        k, H = _first_passage_on_grid(bf, t, delta, rng, n)
        L = (k - 0.5) * delta
    if size is None:
        return float(L[0]), float(H[0])
    return L, H


def choose_inverse_step(bf, t: float, rng, tol: float = 2e-3, pilot: int = 4000, max_refinements: int = 14) -> float:
    # start from a step comparable to the typical passage time
    delta = max(float(t), 1.0) / 4.0
    for _ in range(max_refinements):
        k_fine, _ = _first_passage_on_grid(bf, t, delta / 2, rng, pilot)
        # the coarse path is the fine one observed every other step
        k_coarse = (k_fine + 1) // 2
        coarse = np.mean((k_coarse - 0.5) * delta)
        fine = np.mean((k_fine - 0.5) * delta / 2)
        if abs(coarse - fine) < tol / 2:
            return delta / 2
        delta /= 2
    raise RefinementCapError(f"inverse subordinator step did not settle within {max_refinements} halvings")


def sample_inverse_stable_exact(alpha: float, t: float, rng, size: int) -> np.ndarray:
    """L_t = (t / H_1)**alpha for the stable subordinator (self-similarity)."""
    return (t / _stable_unit(alpha, rng, size)) ** alpha


# --------------------------------------------------------------------------
# closed forms


def inverse_stable_moment(alpha: float, beta: float, t: float = 1.0) -> float:
    """E[(L_t)^beta] for the inverse alpha-stable subordinator, beta < 1/alpha."""
    if not 0 < beta < 1.0 / alpha:
        raise SubordinationError("need 0 < beta < 1/alpha")
    return math.gamma(beta + 1.0) / math.gamma(alpha * beta + 1.0) * t ** (alpha * beta)


def stable_moment(alpha: float, beta: float, t: float = 1.0) -> float:
    """E[(H_t)^beta] for the alpha-stable subordinator, beta < alpha."""
    if not 0 < beta < alpha:
        raise SubordinationError("need 0 < beta < alpha")
    return math.gamma(1.0 - beta / alpha) / math.gamma(1.0 - beta) * t ** (beta / alpha)


def inv_stable_tail_bound(alpha: float, beta: float, e_zeta_moment: float, t: float) -> float:
    """Upper bound on P(zeta^L > t) given E[zeta^(beta/alpha)]."""
    if not 0.0 < beta < alpha < 1.0:
        raise SubordinationError("need 0 < beta < alpha < 1")
    if not t > 0:
        raise SubordinationError("t must be positive")
    return math.gamma(1.0 - beta / alpha) / math.gamma(1.0 - beta) * e_zeta_moment * t ** (-beta)


def sticky_inverse_moment_constant(alpha: float, beta: float, theta: float, eta_over_sigma: float) -> float:
    """Constant C in t**theta (1 - C t**(beta (1/(2 alpha) - 1))) <= E[(V^-1_t)^theta]."""
    if not 0 < beta < alpha < 1 or theta < 0:
        raise SubordinationError("need 0 < beta < alpha < 1 and theta >= 0")
    q = beta / (2.0 * alpha)
    return (
        4.0**q
        * math.gamma(q + 0.5)
        / math.gamma(0.5)
        * theta
        * math.gamma(theta + q)
        * math.gamma(1.0 - beta / alpha)
        / math.gamma(theta + q - beta + 1.0)
        * eta_over_sigma ** (beta / alpha)
    )


def mean_inverse_subordinator_scale(bf: BernsteinFunction, t: float) -> float:
    """1/Phi(1/t), the growth scale of E[L_t] and of the time-changed MSD."""
    return 1.0 / float(bf.phi(1.0 / t))


# --------------------------------------------------------------------------
# convolution derivative


def nonlocal_derivative(u_samples, dt: float, bf: BernsteinFunction, fd_tol: float | None = None) -> float:
    """Right-endpoint value of int_0^t u'(s) tail(t - s) ds on a uniform grid.

    u' is taken cellwise constant and the kernel is integrated exactly over
    each cell, which removes the integrable singularity of the tail at 0.
    """
    u = np.asarray(u_samples, dtype=float)
    if u.ndim != 1 or len(u) < 3:
        raise SubordinationError("need at least three grid samples")
    if not dt > 0:
        raise SubordinationError("grid step must be positive")
    if fd_tol is not None:
        curv = np.max(np.abs(np.diff(u, 2))) / dt  # ~ dt * |u''|
        if curv / 2 > fd_tol:
            raise SubordinationError(f"grid too coarse: slope error ~{curv / 2:.3g} > {fd_tol}")
    if isinstance(bf, Identity):
        return float((3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * dt))
    slopes = np.diff(u) / dt
    n = len(slopes)
    lags = dt * np.arange(n + 1)
    K = bf.tail_integral(lags)
    # cell k spans [k dt, (k+1) dt]; its weight is K(t - k dt) - K(t - (k+1) dt)
    w = K[::-1][:-1] - K[::-1][1:]
    return float(np.dot(slopes, w))


def nonlocal_derivative_path(u_samples, dt: float, bf: BernsteinFunction) -> np.ndarray:
    """D^Phi u at every grid time (FFT convolution)."""
    from scipy.signal import fftconvolve

    u = np.asarray(u_samples, dtype=float)
    slopes = np.diff(u) / dt
    if isinstance(bf, Identity):
        return np.concatenate([[slopes[0]], slopes])
    n = len(slopes)
    K = bf.tail_integral(dt * np.arange(n + 1))
    w = np.diff(K)  # w[j] = integral of the tail over lag cell j
    out = fftconvolve(slopes, w)[:n]
    return np.concatenate([[0.0], out])


def young_inequality_sides(u_samples, dt: float, bf: BernsteinFunction, p: float) -> tuple[float, float]:
    """(int |D^Phi u|^p, (int |u'|^p) Phi'(0)^p) by the trapezoid rule."""
    d = nonlocal_derivative_path(u_samples, dt, bf)
    du = np.gradient(np.asarray(u_samples, dtype=float), dt)
    lhs = integrate.trapezoid(np.abs(d) ** p, dx=dt)
    rhs = integrate.trapezoid(np.abs(du) ** p, dx=dt) * bf.phi_prime_at_zero**p
    return float(lhs), float(rhs)


def laplace_of_tail(bf: BernsteinFunction, lam: float) -> float:
    """int_0^inf exp(-lam z) tail(z) dz by quadrature (should equal Phi(lam)/lam)."""
    # split at 1 so the z**-alpha singularity sits at an endpoint
    f = lambda z: math.exp(-lam * z) * float(bf.tail(z))
    a, _ = integrate.quad(f, 0.0, 1.0, limit=200, epsabs=0, epsrel=1e-10)
    b, _ = integrate.quad(f, 1.0, math.inf, limit=200, epsabs=0, epsrel=1e-10)
    return a + b


# --------------------------------------------------------------------------
# Mittag-Leffler on the negative axis

ML_SERIES_CUTOFF = 1.0


def mittag_leffler(beta: float, z: float) -> float:
    """E_beta(z) for 0 < beta <= 1 and real z <= 0."""
    if not 0.0 < beta <= 1.0:
        raise SubordinationError("Mittag-Leffler order must lie in (0, 1]")
    if z > 0 or not math.isfinite(z):
        raise SubordinationError("only the branch z <= 0 is supported")
    if z == 0.0:
        return 1.0
    if beta == 1.0:
        return math.exp(z)
    x = -z
    if x <= ML_SERIES_CUTOFF:
        return _ml_series(beta, -x)
    return _ml_integral(beta, x)


def _ml_series(beta: float, z: float, terms: int = 600) -> float:
    k = np.arange(terms)
    with np.errstate(divide="ignore"):
        logmag = k * math.log(abs(z)) - special.gammaln(beta * k + 1.0)
    sign = np.where(k % 2 == 1, -1.0, 1.0) if z < 0 else np.ones(terms)
    return float(math.fsum(sign * np.exp(logmag)))


def _ml_integral(beta: float, x: float) -> float:
    # E_beta(-x) = int_0^inf exp(-x^(1/beta) r) K(r) dr; with r = u**(1/beta) the
    # integrand is smooth: sin(pi beta)/(pi beta) exp(-(x u)^(1/beta)) / (u^2 + 2u cos(pi beta) + 1)
    c = math.cos(math.pi * beta)
    pref = math.sin(math.pi * beta) / (math.pi * beta)
    f = lambda u: math.exp(-((x * u) ** (1.0 / beta))) / (u * u + 2.0 * u * c + 1.0)
    scale = 1.0 / x
    parts = [0.0, scale, 10 * scale, 100 * scale, math.inf]
    total = 0.0
    for a, b in zip(parts[:-1], parts[1:]):
        v, _ = integrate.quad(f, a, b, limit=400, epsabs=1e-15, epsrel=1e-13)
        total += v
    return pref * total


# --------------------------------------------------------------------------
# oracle table


def oracle_table_csv(rows) -> str:
    buf = io.StringIO()
    buf.write("quantity,params,closed_form,mc_estimate,std_err\n")
    for r in rows:
        buf.write(f"{r['quantity']},{r['params']},{float(r['closed_form'])!r},{float(r['mc_estimate'])!r},{float(r['std_err'])!r}\n")
    return buf.getvalue()
