import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from traplab import subordination as sub

ALL = [sub.Stable(0.5), sub.Gamma(1.0, 1.0), sub.TemperedStable(0.5, 1.0), sub.Stable(0.8), sub.Gamma(2.0, 0.5)]


def test_phi_values():
    assert sub.Stable(0.5).phi(4.0) == pytest.approx(2.0)
    assert sub.Gamma(1.0, 1.0).phi(1.0) == pytest.approx(math.log(2.0))
    assert sub.TemperedStable(0.5, 1.0).phi(3.0) == pytest.approx(1.0)
    assert sub.Identity().phi(3.5) == 3.5


def test_phi_prime_at_zero():
    assert sub.Gamma(1.0, 1.0).phi_prime_at_zero == pytest.approx(1.0)
    assert sub.Gamma(2.0, 4.0).phi_prime_at_zero == pytest.approx(0.5)
    assert math.isinf(sub.Stable(0.5).phi_prime_at_zero)
    assert sub.TemperedStable(0.5, 1.0).phi_prime_at_zero == pytest.approx(0.5)


def test_make_bernstein_round_trip():
    bf = sub.make_bernstein({"kind": "tempered-stable", "alpha": 0.3, "theta": 2.0})
    assert isinstance(bf, sub.TemperedStable)
    with pytest.raises(sub.SubordinationError):
        sub.make_bernstein({"kind": "levy"})
    with pytest.raises(sub.SubordinationError):
        sub.make_bernstein({"kind": "stable", "beta": 0.5})


def test_parameter_checks():
    with pytest.raises(sub.SubordinationError):
        sub.Stable(1.2)
    with pytest.raises(sub.SubordinationError):
        sub.Gamma(-1.0, 1.0)


@pytest.mark.parametrize("bf", ALL, ids=sub.describe)
@pytest.mark.parametrize("lam", [0.3, 1.0, 5.0])
def test_laplace_of_tail_is_phi_over_lambda(bf, lam):
    assert sub.laplace_of_tail(bf, lam) == pytest.approx(bf.phi(lam) / lam, rel=1e-6)


@pytest.mark.parametrize("beta", [0.1, 0.3, 0.5, 0.7, 0.95])
@pytest.mark.parametrize("z", [-0.5, -3.0, -20.0])
def test_mittag_leffler_against_mpmath(beta, z):
    ref = mpmath.nsum(lambda k: mpmath.mpf(z) ** k / mpmath.gamma(beta * k + 1), [0, mpmath.inf]) if z > -4 else None
    if ref is None:
        # contour-free reference: Laplace inversion of s^(beta-1)/(s^beta + |z|)
        mpmath.mp.dps = 30
        ref = mpmath.invertlaplace(lambda s: s ** (beta - 1) / (s**beta - z), 1.0, method="talbot")
        mpmath.mp.dps = 15
    assert sub.mittag_leffler(beta, z) == pytest.approx(float(ref), rel=1e-8, abs=1e-12)


def test_mittag_leffler_limits():
    assert sub.mittag_leffler(1.0, -2.0) == pytest.approx(math.exp(-2.0))
    assert sub.mittag_leffler(0.5, 0.0) == 1.0


def test_inverse_stable_moment_range():
    with pytest.raises(sub.SubordinationError):
        sub.inverse_stable_moment(0.5, 2.0)


def test_inverse_stable_moment_closed_form():
    assert sub.inverse_stable_moment(0.5, 1.0) == pytest.approx(2.0 / math.sqrt(math.pi))
    assert sub.inverse_stable_moment(0.5, 1.5) == pytest.approx(math.gamma(2.5) / math.gamma(1.75))


def test_nonlocal_derivative_of_identity_function():
    dt = 1e-4
    s = np.arange(0.0, 1.0 + dt / 2, dt)
    assert sub.nonlocal_derivative(s, dt, sub.Stable(0.5)) == pytest.approx(1.0 / math.gamma(1.5), abs=1e-3)
    assert sub.nonlocal_derivative(s**2, dt, sub.Identity()) == pytest.approx(2.0, abs=1e-8)


def test_nonlocal_derivative_of_constant_vanishes():
    dt = 1e-3
    u = np.full(1001, 3.0)
    for bf in ALL:
        assert abs(sub.nonlocal_derivative(u, dt, bf)) < 1e-12


def test_tail_bound_and_constant():
    assert sub.sticky_inverse_moment_constant(0.5, 0.25, 1.0, 1.0) == pytest.approx(math.pi / 2, rel=1e-12)
    assert sub.inv_stable_tail_bound(0.6, 0.3, 1.0, 2.0) > 0


def test_exact_inverse_stable_mean():
    rng = np.random.default_rng(1)
    L = sub.sample_inverse_stable_exact(0.5, 1.0, rng, 40_000)
    assert abs(L.mean() - 2.0 / math.sqrt(math.pi)) < 4 * L.std() / math.sqrt(len(L))


def test_inverse_on_grid_matches_exact():
    rng = np.random.default_rng(2)
    L, _ = sub.sample_inverse_at(sub.Stable(0.5), 1.0, rng, size=20_000)
    assert L.mean() == pytest.approx(2.0 / math.sqrt(math.pi), rel=0.03)


def test_oracle_table_csv_header():
    row = {"quantity": "q", "params": "p", "closed_form": np.float64(1.0), "mc_estimate": 1.0, "std_err": 0.0}
    assert sub.oracle_table_csv([row]).splitlines() == ["quantity,params,closed_form,mc_estimate,std_err", "q,p,1.0,1.0,0.0"]


@given(alpha=st.floats(0.05, 0.95), lam=st.floats(1e-3, 1e3))
def test_stable_phi_is_power(alpha, lam):
    assert sub.Stable(alpha).phi(lam) == pytest.approx(lam**alpha, rel=1e-12)


@pytest.mark.parametrize("bf", ALL, ids=sub.describe)
@given(a=st.floats(1e-3, 50.0), b=st.floats(1e-3, 50.0))
def test_phi_increasing_and_subadditive(bf, a, b):
    # Bernstein functions are increasing and concave with phi(0) = 0
    assert bf.phi(a + b) <= bf.phi(a) + bf.phi(b) * (1 + 1e-12) + 1e-15
    assert bf.phi(max(a, b)) >= bf.phi(min(a, b))


@pytest.mark.parametrize("bf", ALL, ids=sub.describe)
@given(t=st.floats(0.01, 3.0), seed=st.integers(0, 2**31))
def test_increments_are_positive(bf, t, seed):
    x = sub.sample_subordinator_increment(bf, t, np.random.default_rng(seed), size=64)
    assert np.all(x > 0) and np.all(np.isfinite(x))


@given(beta=st.floats(0.2, 0.99), z=st.floats(-30.0, 0.0))
def test_mittag_leffler_is_completely_monotone_in_range(beta, z):
    v = sub.mittag_leffler(beta, z)
    assert 0.0 < v <= 1.0
    assert sub.mittag_leffler(beta, z - 0.5) <= v + 1e-12


@given(alpha=st.floats(0.1, 0.9), frac=st.floats(0.01, 0.99))
def test_moment_duality(alpha, frac):
    # E[L_1^q] = Gamma(1+q) / Gamma(1+alpha q) on the admitted range q < 1/alpha
    q = frac / alpha
    assert sub.inverse_stable_moment(alpha, q) == pytest.approx(math.gamma(1 + q) / math.gamma(1 + alpha * q), rel=1e-12)
