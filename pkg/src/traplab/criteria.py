"""Closed-form classifiers: horn trap integral, modified-Koch series test,
polygon corner coefficients and the Koch heat-loss exponent.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

TRAP = "Trap"
NON_TRAP = "NonTrap"

# a fitted integrand tail exponent at or above -1 - HORN_SLOPE_TOL counts as divergent
HORN_SLOPE_TOL = 0.01


class CriteriaError(ValueError):
    pass


@dataclass(frozen=True)
class TrapVerdict:
    verdict: str
    evidence: tuple
    threshold_note: str
    family: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in (TRAP, NON_TRAP):
            raise CriteriaError(f"unknown verdict {self.verdict!r}")
        ev = np.asarray(self.evidence, dtype=float)
        if np.any(np.diff(ev) < 0):
            raise CriteriaError("evidence sequence must be nondecreasing")

    @property
    def is_trap(self) -> bool:
        return self.verdict == TRAP


# --------------------------------------------------------------------------
# horn


def _horn_integrand(x: float, b: float) -> float:
    """f(x) * int_1^x 1/f with f = exp(-r**b), evaluated as int_1^x exp(s**b - x**b) ds."""
    if x <= 1.0:
        return 0.0
    xb = x**b
    f = lambda u: math.exp((x - u) ** b - xb)
    width = x ** (1.0 - b) / b  # decay length of the integrand near s = x
    span = x - 1.0
    cuts = [0.0]
    for m in (1.0, 5.0, 40.0):
        if m * width < span:
            cuts.append(m * width)
    cuts.append(span)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if f(lo) < 1e-30:
            break
        v, _ = integrate.quad(f, lo, hi, limit=200, epsabs=1e-14, epsrel=1e-10)
        total += v
    return total


def horn_trap_classifier(b: float, x_cap: float = 1000.0, n_grid: int = 400) -> TrapVerdict:
    """Divergence test for int_1^inf f(x) int_1^x (1/f) dx with f = exp(-x**b).

    The integrand is tabulated on a geometric grid; the verdict is Trap when its
    log-log slope over [x_cap/4, x_cap] is at least -1 (minus HORN_SLOPE_TOL).
    """
    if not b > 0:
        raise CriteriaError("horn exponent b must be positive")
    if not x_cap >= 10:
        raise CriteriaError("x_cap must be at least 10")
    xs = np.geomspace(1.0, x_cap, n_grid)
    g = np.array([_horn_integrand(x, b) for x in xs])
    if not np.all(np.isfinite(g)):
        raise CriteriaError("horn quadrature failed")
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(xs))])
    caps = [x_cap / 4, x_cap / 2, x_cap]
    evidence = tuple(float(np.interp(c, xs, cum)) for c in caps)
    tail = xs >= x_cap / 4
    slope = float(np.polyfit(np.log(xs[tail]), np.log(g[tail]), 1)[0])
    verdict = TRAP if slope >= -1.0 - HORN_SLOPE_TOL else NON_TRAP
    note = f"integrand tail slope {slope:.4f} vs -1 (tol {HORN_SLOPE_TOL}); partial integrals at x_cap/4, x_cap/2, x_cap"
    return TrapVerdict(verdict, evidence, note, "horn", {"b": b, "x_cap": x_cap})


# --------------------------------------------------------------------------
# modified Koch


def modified_koch_classifier(gamma: float, a: float, n_terms: int = 20) -> TrapVerdict:
    """Geometric-series test on the ratio a**(2 - gamma)."""
    if not 0.0 < a < 1.0:
        raise CriteriaError("a must lie in (0, 1)")
    ratio = a ** (2.0 - gamma)
    sums = np.cumsum(ratio ** np.arange(1, n_terms + 1))
    verdict = TRAP if gamma >= 2.0 else NON_TRAP
    note = f"ratio a^(2-gamma) = {ratio:.6g}; Trap iff ratio >= 1 (gamma >= 2)"
    return TrapVerdict(verdict, tuple(float(s) for s in sums), note, "modified_koch", {"gamma": gamma, "a": a})


# --------------------------------------------------------------------------
# corner coefficient


def _corner_integrand(z: float, g: float) -> float:
    a = math.pi - g
    if a == 0.0:
        return 0.0
    if z == 0.0:
        return a / math.pi
    # overflow-free form of sinh(a z) / (sinh(pi z) cosh(g z))
    sa = -math.expm1(-2.0 * abs(a) * z)
    sp = -math.expm1(-2.0 * math.pi * z)
    cg = 1.0 + math.exp(-2.0 * g * z)
    return math.copysign(2.0, a) * math.exp((abs(a) - math.pi - g) * z) * sa / (sp * cg)


def corner_coefficient(gamma_angle: float) -> float:
    """c(gamma) = 4 int_0^inf sinh((pi - gamma) z) / (sinh(pi z) cosh(gamma z)) dz."""
    g = float(gamma_angle)
    if not 0.0 < g < 2.0 * math.pi:
        raise CriteriaError("angle must lie in (0, 2 pi)")
    if g == math.pi:
        return 0.0
    # the integrand decays like exp(-2 min(gamma, pi) z)
    rate = 2.0 * min(g, math.pi)
    z_end = 60.0 / rate
    total = 0.0
    for lo, hi in ((0.0, 1.0 / rate), (1.0 / rate, 8.0 / rate), (8.0 / rate, z_end)):
        v, err = integrate.quad(_corner_integrand, lo, hi, args=(g,), limit=200, epsabs=1e-13, epsrel=1e-12)
        if err > 1e-9:
            raise CriteriaError(f"corner quadrature did not converge (err {err:.3g})")
        total += v
    return 4.0 * total


# --------------------------------------------------------------------------
# Koch exponent


def koch_dimension(alpha: float) -> float:
    return math.log(4.0) / math.log(alpha)


def koch_heat_exponent(alpha: float) -> float:
    """(2 - d_f) / 2 with d_f = log 4 / log alpha."""
    if not 2.0 < alpha <= 4.0:
        raise CriteriaError("alpha must lie in (2, 4]")
    return (2.0 - koch_dimension(alpha)) / 2.0


def matching_fractional_order(alpha: float) -> float:
    """The time-fractional order beta whose disk heat-loss exponent beta/2 equals the Koch one."""
    return 2.0 - koch_dimension(alpha)


# --------------------------------------------------------------------------
# output


def verdicts_csv(verdicts) -> str:
    buf = io.StringIO()
    buf.write("family,params,verdict,evidence_tail\n")
    for v in verdicts:
        params = ";".join(f"{k}={v.params[k]!r}" for k in v.params)
        buf.write(f"{v.family},{params},{v.verdict},{v.evidence[-1]!r}\n")
    return buf.getvalue()
