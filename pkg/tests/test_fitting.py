import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from traplab.fitting import FitError, dyadic_grid, fit_power_law


def test_exact_power_law():
    t = np.geomspace(1e-4, 1e-1, 12)
    fit = fit_power_law(t, 3.0 * t**0.37)
    assert fit.exponent == pytest.approx(0.37, abs=1e-12)
    assert fit.coefficient == pytest.approx(3.0, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_rejects_nonpositive():
    with pytest.raises(FitError):
        fit_power_law([1.0, 2.0, 3.0], [1.0, 0.0, 2.0])


def test_dyadic_grid():
    g = dyadic_grid(1.0, 16.0, 1)
    assert np.allclose(g, [1, 2, 4, 8, 16])
    assert np.allclose(np.diff(np.log2(dyadic_grid(1e-3, 1.0, 4))), 0.25)


@given(p=st.floats(-2.0, 2.0), c=st.floats(1e-3, 1e3), n=st.integers(3, 30))
def test_recovers_any_power(p, c, n):
    t = np.geomspace(0.01, 10.0, n)
    fit = fit_power_law(t, c * t**p)
    assert fit.exponent == pytest.approx(p, abs=1e-9)
    assert fit.coefficient == pytest.approx(c, rel=1e-8)
