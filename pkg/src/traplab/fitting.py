"""Power-law fits in log-log coordinates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    exponent: float
    coefficient: float
    std_err: float
    r_squared: float
    t_window: tuple[float, float]
    n_points: int = 0
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        lo, hi = self.t_window
        if not (lo > 0 and hi > 0 and lo <= hi):
            raise FitError(f"bad fit window {self.t_window}")
        if not 0.0 <= self.r_squared <= 1.0 + 1e-12:
            raise FitError(f"r_squared out of range: {self.r_squared}")

    def predict(self, t):
        return self.coefficient * np.asarray(t, dtype=float) ** self.exponent


def fit_power_law(t, y, sigma=None, min_points: int = 2) -> FitResult:
    """Weighted least squares of log y on log t.

    ``sigma`` are absolute standard errors of ``y``; they become relative
    errors ``sigma / y`` on the log scale.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise FitError("t and y must be equal-length 1-d arrays")
    if len(t) < min_points:
        raise FitError(f"need at least {min_points} points, got {len(t)}")
    if np.any(t <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs positive t and y")
    x = np.log(t)
    z = np.log(y)
    if sigma is None:
        w = np.ones_like(x)
    else:
        s = np.asarray(sigma, dtype=float) / y
        s = np.where(s > 0, s, np.min(s[s > 0]) if np.any(s > 0) else 1.0)
        w = 1.0 / s**2
    W = w.sum()
    xm = (w * x).sum() / W
    zm = (w * z).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    if sxx == 0:
        raise FitError("degenerate abscissae")
    slope = (w * (x - xm) * (z - zm)).sum() / sxx
    icpt = zm - slope * xm
    resid = z - (icpt + slope * x)
    ss_res = (w * resid**2).sum()
    ss_tot = (w * (z - zm) ** 2).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    n = len(x)
    if n > 2:
        if sigma is None:
            var_slope = ss_res / (n - 2) / sxx
        else:
            # known errors, inflated by the reduced chi^2 when the model misfits
            var_slope = max(1.0, ss_res / (n - 2)) / sxx
    else:
        var_slope = 0.0
    return FitResult(
        exponent=float(slope),
        coefficient=float(math.exp(icpt)),
        std_err=float(math.sqrt(var_slope)),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        t_window=(float(t.min()), float(t.max())),
        n_points=n,
    )


def dyadic_grid(t_min: float, t_max: float, per_octave: int = 1) -> np.ndarray:
    """Powers of two (optionally subdivided) covering [t_min, t_max]."""
    if not 0 < t_min < t_max:
        raise FitError("dyadic grid needs 0 < t_min < t_max")
    k0 = math.ceil(math.log2(t_min) * per_octave - 1e-9)
    k1 = math.floor(math.log2(t_max) * per_octave + 1e-9)
    return 2.0 ** (np.arange(k0, k1 + 1) / per_octave)
