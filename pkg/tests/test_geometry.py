import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from traplab import geometry as geo

KOCH_LIMIT_AREA = 2.0 * math.sqrt(3.0) / 5.0


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_koch_edge_count(level):
    k = geo.build_koch_snowflake(3.0, level)
    assert k.n_edges == 3 * 4**level


def test_koch_area_approaches_limit():
    areas = [geo.build_koch_snowflake(3.0, n).area for n in range(6)]
    assert areas[0] == pytest.approx(math.sqrt(3.0) / 4.0)
    assert np.all(np.diff(areas) > 0)
    # each level adds 3*4^(n-1) triangles of area (1/9)^n times the base
    exact = [math.sqrt(3.0) / 4.0 * (1.0 + 0.6 * (1.0 - (4.0 / 9.0) ** n)) for n in range(6)]
    assert np.allclose(areas, exact, rtol=1e-12)
    assert areas[-1] < KOCH_LIMIT_AREA


def test_koch_perimeter_grows_by_four_thirds():
    p = [geo.build_koch_snowflake(3.0, n).perimeter for n in range(4)]
    assert np.allclose(np.array(p[1:]) / np.array(p[:-1]), 4.0 / 3.0)


def test_koch_rejects_bad_alpha():
    with pytest.raises(geo.GeometryError):
        geo.build_koch_snowflake(1.5, 2)


def test_walled_underflow_refused():
    with pytest.raises(geo.GeometryError, match="underflow"):
        geo.build_walled_snowflake(3.0, 3, 2.5)


def test_walled_openings_shrink_with_level():
    w = geo.build_walled_snowflake(3.0, 2, 2.0)
    by_level = {}
    for o in w.openings:
        by_level.setdefault(o.level, set()).add(round(o.log_width, 9))
    assert max(by_level[2]) < min(by_level[1])


def test_unit_square_angles():
    assert np.allclose(geo.unit_square().interior_angles(), math.pi / 2)


def test_base_triangle_centroid_inside_koch():
    k = geo.build_koch_snowflake(3.0, 3)
    c = (0.5, -math.sqrt(3.0) / 6.0)
    assert geo.contains(k, c)
    # the middle thirds open into bumps, so the nearest boundary points are
    # the inner ends of the outer thirds
    assert geo.boundary_distance(k, c) == pytest.approx(1.0 / 3.0, rel=1e-9)


def test_disk_boundary_distance():
    d = geo.Disk(2.0)
    assert geo.boundary_distance(d, (0.5, 0.0)) == pytest.approx(1.5)
    assert not geo.contains(d, (2.5, 0.0))


def test_reflect_square_specular():
    p = geo.reflect_step(geo.unit_square(), (0.5, 0.95), (0.6, 1.15))
    assert p.x == pytest.approx(0.6)
    assert p.y == pytest.approx(0.85)


def test_reflect_may_land_on_boundary():
    p = geo.reflect_step(geo.unit_square(), (0.5, 0.5), (0.5, 1.0))
    assert p.y == pytest.approx(1.0)


def test_reflect_through_corner_goes_back():
    p = geo.reflect_step(geo.unit_square(), (0.75, 0.75), (1.5, 1.5))
    assert (p.x, p.y) == pytest.approx((0.5, 0.5))


def test_reflect_interval():
    assert geo.reflect_step(geo.Interval(1.0), (0.1, 0.0), (-0.3, 0.0)).x == pytest.approx(0.3)


def test_exports():
    k = geo.build_koch_snowflake(3.0, 1)
    text = geo.to_csv(k)
    assert text.splitlines()[0].count(",") == 2
    assert len(text.splitlines()) == 1 + k.n_edges
    assert geo.to_svg(k).lstrip().startswith("<svg")


@given(
    x=st.floats(0.01, 0.99), y=st.floats(0.01, 0.99),
    dx=st.floats(-3.0, 3.0), dy=st.floats(-3.0, 3.0),
)
def test_reflection_stays_inside_square(x, y, dx, dy):
    sq = geo.unit_square()
    p = geo.reflect_step(sq, (x, y), (x + dx, y + dy))
    assert -1e-12 <= p.x <= 1 + 1e-12 and -1e-12 <= p.y <= 1 + 1e-12


@given(r=st.floats(0.0, 0.999), th=st.floats(0.0, 2 * math.pi), step=st.floats(0.0, 0.5), phi=st.floats(0.0, 2 * math.pi))
def test_reflection_stays_inside_disk(r, th, step, phi):
    d = geo.Disk(1.0)
    x, y = r * math.cos(th), r * math.sin(th)
    p = geo.reflect_step(d, (x, y), (x + step * math.cos(phi), y + step * math.sin(phi)))
    assert math.hypot(p.x, p.y) <= 1.0 + 1e-12


@given(seed=st.integers(0, 2**32 - 1))
def test_uniform_samples_inside_koch(seed):
    k = geo.build_koch_snowflake(3.0, 2)
    pts = geo.sample_uniform(k, 200, np.random.default_rng(seed))
    assert geo.contains_many(k, pts).all()


@given(alpha=st.floats(2.05, 3.95), level=st.integers(0, 3))
def test_koch_edge_count_any_alpha(alpha, level):
    k = geo.build_koch_snowflake(alpha, level)
    assert k.n_edges == 3 * 4**level
    assert k.area > math.sqrt(3.0) / 4.0 - 1e-12
