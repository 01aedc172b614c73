import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from traplab import criteria as crit


@pytest.mark.parametrize("b, verdict", [(1.0, crit.TRAP), (2.0, crit.TRAP), (3.0, crit.NON_TRAP), (2.5, crit.NON_TRAP), (1.5, crit.TRAP)])
def test_horn(b, verdict):
    v = crit.horn_trap_classifier(b)
    assert v.verdict == verdict
    assert v.family == "horn"


def test_horn_rejects_bad_input():
    with pytest.raises(crit.CriteriaError):
        crit.horn_trap_classifier(0.0)
    with pytest.raises(crit.CriteriaError):
        crit.horn_trap_classifier(2.0, x_cap=5.0)


@pytest.mark.parametrize("gamma, verdict", [(1.5, crit.NON_TRAP), (2.0, crit.TRAP), (3.0, crit.TRAP)])
def test_modified_koch(gamma, verdict):
    assert crit.modified_koch_classifier(gamma, 1.0 / 3.0).verdict == verdict


def test_corner_known_values():
    assert abs(crit.corner_coefficient(math.pi)) < 1e-12
    assert abs(crit.corner_coefficient(math.pi / 2) - 4.0 / math.pi) < 1e-8
    # equilateral corner: 4/sqrt(3)
    assert crit.corner_coefficient(math.pi / 3) == pytest.approx(4.0 / math.sqrt(3.0), rel=1e-9)


def test_corner_rejects_bad_angle():
    with pytest.raises(crit.CriteriaError):
        crit.corner_coefficient(0.0)


def test_koch_exponent():
    assert crit.koch_heat_exponent(3.0) == pytest.approx(1.0 - math.log(4) / math.log(9))
    assert crit.koch_heat_exponent(4.0) == pytest.approx(0.5)
    assert crit.matching_fractional_order(3.0) == pytest.approx(2 * crit.koch_heat_exponent(3.0))
    with pytest.raises(crit.CriteriaError):
        crit.koch_heat_exponent(1.9)


def test_verdict_evidence_must_be_monotone():
    with pytest.raises(crit.CriteriaError):
        crit.TrapVerdict(crit.TRAP, (1.0, 0.5), "x")
    with pytest.raises(crit.CriteriaError):
        crit.TrapVerdict("Maybe", (1.0,), "x")


def test_verdicts_csv():
    text = crit.verdicts_csv([crit.modified_koch_classifier(2.0, 0.5)])
    head, row = text.splitlines()
    assert head == "family,params,verdict,evidence_tail"
    assert row.startswith("modified_koch,") and ",Trap," in row


@given(g1=st.floats(0.1, 6.1), g2=st.floats(0.1, 6.1))
def test_corner_coefficient_decreasing(g1, g2):
    lo, hi = sorted((g1, g2))
    if hi - lo < 1e-6:
        return
    assert crit.corner_coefficient(lo) > crit.corner_coefficient(hi)


@given(g=st.floats(0.05, math.pi - 0.05))
def test_corner_sign(g):
    assert crit.corner_coefficient(g) > 0
    assert crit.corner_coefficient(2 * math.pi - g) < 0


@given(gamma=st.floats(0.5, 4.0), a=st.floats(0.05, 0.95))
def test_modified_koch_threshold(gamma, a):
    v = crit.modified_koch_classifier(gamma, a)
    assert v.is_trap == (gamma >= 2.0)


@given(alpha=st.floats(2.01, 4.0))
def test_koch_exponent_range(alpha):
    e = crit.koch_heat_exponent(alpha)
    assert 0.0 < e <= 0.5 + 1e-15
    # log 4 / log alpha rounds to exactly 1 just below alpha = 4
    assert 1.0 <= crit.koch_dimension(alpha) < 2.0
