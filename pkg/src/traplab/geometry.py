"""Planar domains: disks, polygons, Koch pre-fractal snowflakes (plain and
walled), truncated horns and intervals, with containment, boundary distance
and specular reflection.

All domain objects are immutable after construction.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import _geomkern as gk

MAX_EDGES = 3 * 4**9
REFLECT_MAX_ITER = 64


class GeometryError(ValueError):
    pass


class ReflectionCapError(GeometryError):
    """Raised when specular reflection does not settle; shrink the step."""


class Point(NamedTuple):
    x: float
    y: float


def as_point(p) -> Point:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite point {p!r}")
    return Point(x, y)


class SegmentIndex(NamedTuple):
    segs: np.ndarray
    gx0: float
    gy0: float
    cell: float
    nx: int
    ny: int
    cstart: np.ndarray
    citems: np.ndarray

    @classmethod
    def from_segments(cls, segs) -> "SegmentIndex":
        return cls(*gk.build_grid(segs))


# --------------------------------------------------------------------------
# domain variants


@dataclass(frozen=True, eq=False)
class Disk:
    radius: float = 1.0
    center: Point = Point(0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("disk radius must be positive")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius

    @property
    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cy - r, cx + r, cy + r)


@dataclass(frozen=True, eq=False)
class Interval:
    """The segment [0, ell] x {0}; only the x coordinate is dynamic."""

    ell: float = 1.0

    def __post_init__(self):
        if not self.ell > 0:
            raise GeometryError("interval length must be positive")

    @property
    def area(self) -> float:
        return self.ell


@dataclass(frozen=True, eq=False)
class Polygon:
    """Simple polygon, vertices counterclockwise, plus optional interior walls.

    ``walls`` has shape (k, 2, 2); walls are zero-thickness obstacles that
    count as boundary for both killing and reflection.
    """

    vertices: np.ndarray
    walls: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("polygon needs an (n>=3, 2) vertex array")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        if signed_area(v) < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        w = np.ascontiguousarray(self.walls, dtype=np.float64).reshape(-1, 2, 2)
        w.setflags(write=False)
        object.__setattr__(self, "walls", w)

    @property
    def n_edges(self) -> int:
        return self.vertices.shape[0]

    @cached_property
    def edges(self) -> np.ndarray:
        v = self.vertices
        return np.concatenate([v, np.roll(v, -1, axis=0)], axis=1)

    @cached_property
    def area(self) -> float:
        return signed_area(self.vertices)

    @cached_property
    def perimeter(self) -> float:
        e = self.edges
        return float(np.hypot(e[:, 2] - e[:, 0], e[:, 3] - e[:, 1]).sum())

    @property
    def bbox(self):
        v = self.vertices
        return (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())

    @cached_property
    def index(self) -> SegmentIndex:
        segs = self.edges
        if len(self.walls):
            segs = np.concatenate([segs, self.walls.reshape(-1, 4)])
        return SegmentIndex.from_segments(segs)

    def interior_angles(self) -> np.ndarray:
        v = self.vertices
        a = np.roll(v, 1, axis=0) - v
        b = np.roll(v, -1, axis=0) - v
        # counterclockwise ring: interior angle runs from the next edge to the previous one
        ang = np.arctan2(b[:, 0] * a[:, 1] - b[:, 1] * a[:, 0], (a * b).sum(axis=1))
        return np.mod(ang, 2 * np.pi)

    def is_simple(self) -> bool:
        return not _has_self_intersection(self.edges)


@dataclass(frozen=True, eq=False)
class Bump:
    """One triangle added by the Koch refinement, attached across a passage."""

    level: int
    base: np.ndarray  # (2, 2) endpoints of the shared side
    apex: np.ndarray
    parent: int  # index into the bump list, -1 for the base triangle

    @property
    def a(self) -> float:
        return float(np.hypot(*(self.base[1] - self.base[0])))

    @property
    def centroid(self) -> np.ndarray:
        return (self.base[0] + self.base[1] + self.apex) / 3.0

    @property
    def normal(self) -> np.ndarray:
        """Unit normal of the passage pointing into the bump."""
        m = 0.5 * (self.base[0] + self.base[1])
        n = self.apex - m
        return n / np.hypot(*n)


@dataclass(frozen=True, eq=False)
class KochSnowflake(Polygon):
    alpha: float = 3.0
    level: int = 0
    bumps: tuple = ()


class Opening(NamedTuple):
    center: np.ndarray
    normal: np.ndarray
    a: float
    log_width: float
    width: float
    level: int


@dataclass(frozen=True, eq=False)
class WalledSnowflake(KochSnowflake):
    gamma: float = 2.0
    openings: tuple = ()


@dataclass(frozen=True, eq=False)
class Horn(Polygon):
    b: float = 1.0
    x_max: float = 4.0
    mesh: int = 200


# --------------------------------------------------------------------------
# construction


def signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def koch_angle(alpha: float) -> float:
    return math.asin(math.sqrt(alpha * (4.0 - alpha)) / 2.0)


def _check_alpha_level(alpha: float, level: int, max_edges: int) -> None:
    if not 2.0 < alpha < 4.0:
        raise GeometryError(f"alpha must lie in (2, 4), got {alpha}")
    if level < 0 or int(level) != level:
        raise GeometryError(f"level must be a nonnegative integer, got {level}")
    if 3 * 4**level > max_edges:
        raise GeometryError(f"level {level} needs {3 * 4**level} edges, above cap {max_edges}")


def _koch_refine(alpha: float, level: int):
    """Koch refinement of the base triangle A, B, C.

    Returns the ordered boundary (complex array) and the list of bumps.
    """
    A, B, C = 0.0 + 0.0j, 1.0 + 0.0j, 0.5 - 1j * math.sqrt(3) / 2
    th = koch_angle(alpha)
    rot_p = np.exp(1j * th) / alpha
    rot_m = np.exp(-1j * th) / alpha
    h = 1j * math.sqrt(1.0 / alpha - 0.25)
    # start/end of each boundary segment plus the triangle it belongs to
    z0 = np.array([A, B, C])
    z1 = np.array([B, C, A])
    owner = np.full(3, -1, dtype=np.int64)
    bumps: list[Bump] = []
    for lev in range(1, level + 1):
        d = z1 - z0
        p1 = z0 + d / alpha  # psi_1(1) = psi_2(0)
        apex = z0 + d * (rot_p + 1.0 / alpha)  # psi_2(1) = psi_3(0)
        p3 = z0 + d * (0.5 + h + rot_m)  # psi_3(1) = psi_4(0)
        first = len(bumps)
        for k in range(len(z0)):
            bumps.append(
                Bump(
                    level=lev,
                    base=np.array([[p1[k].real, p1[k].imag], [p3[k].real, p3[k].imag]]),
                    apex=np.array([apex[k].real, apex[k].imag]),
                    parent=int(owner[k]),
                )
            )
        new_id = first + np.arange(len(z0))
        nz0 = np.stack([z0, p1, apex, p3], axis=1).ravel()
        nz1 = np.stack([p1, apex, p3, z1], axis=1).ravel()
        nown = np.stack([owner, new_id, new_id, owner], axis=1).ravel()
        z0, z1, owner = nz0, nz1, nown
    return z0, bumps


def build_koch_snowflake(alpha: float, level: int, max_edges: int = MAX_EDGES) -> KochSnowflake:
    """Pre-fractal snowflake bounded by three level-``level`` Koch curves."""
    _check_alpha_level(alpha, level, max_edges)
    z, bumps = _koch_refine(alpha, level)
    v = np.column_stack([z.real, z.imag])
    return KochSnowflake(vertices=v, alpha=float(alpha), level=int(level), bumps=tuple(bumps))


def opening_log_width(gamma: float, a: float) -> float:
    """log w(gamma, a) with w = exp(-a**-gamma), clamped so that w <= a."""
    return min(-(a ** (-gamma)), math.log(a))


def build_walled_snowflake(alpha: float, level: int, gamma: float, max_edges: int = MAX_EDGES) -> WalledSnowflake:
    """Koch snowflake whose inter-triangle passages are walled off except for
    a centered opening of width ``exp(-a**-gamma)`` (capped at ``a``)."""
    _check_alpha_level(alpha, level, max_edges)
    if not math.isfinite(gamma):
        raise GeometryError("gamma must be finite")
    z, bumps = _koch_refine(alpha, level)
    walls = []
    openings = []
    for b in bumps:
        a = b.a
        logw = opening_log_width(gamma, a)
        w = math.exp(logw)
        if w == 0.0:
            raise GeometryError(
                f"opening width exp({logw:.6g}) underflows to 0 at level {b.level} "
                f"(a={a:.6g}, gamma={gamma}); refusing to merge the walls"
            )
        x, y = b.base
        u = (y - x) / a
        m = 0.5 * (x + y)
        if w < a:
            walls.append([x, x + 0.5 * (a - w) * u])
            walls.append([y, y - 0.5 * (a - w) * u])
        openings.append(Opening(center=m, normal=b.normal, a=a, log_width=logw, width=w, level=b.level))
    v = np.column_stack([z.real, z.imag])
    return WalledSnowflake(
        vertices=v,
        walls=np.array(walls).reshape(-1, 2, 2),
        alpha=float(alpha),
        level=int(level),
        bumps=tuple(bumps),
        gamma=float(gamma),
        openings=tuple(openings),
    )


def build_horn(b: float, x_max: float, mesh: int = 200) -> Horn:
    """Polygonal approximation of {1 < x < x_max, |y| <= exp(-x**b)}."""
    if not b > 0 or not x_max > 1 or mesh < 2:
        raise GeometryError("horn needs b > 0, x_max > 1, mesh >= 2")
    xs = np.linspace(1.0, x_max, mesh + 1)
    f = np.exp(-(xs**b))
    upper = np.column_stack([xs, f])
    lower = np.column_stack([xs[::-1], -f[::-1]])
    return Horn(vertices=np.concatenate([lower, upper]), b=float(b), x_max=float(x_max), mesh=int(mesh))


def unit_square() -> Polygon:
    return Polygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def regular_polygon(n: int, radius: float = 1.0) -> Polygon:
    th = 2 * np.pi * np.arange(n) / n
    return Polygon(np.column_stack([radius * np.cos(th), radius * np.sin(th)]))


def _has_self_intersection(edges: np.ndarray, chunk: int = 512) -> bool:
    m = len(edges)
    if m < 4:
        return False
    a = edges[:, :2]
    b = edges[:, 2:]
    idx = np.arange(m)
    for s in range(0, m, chunk):
        i = idx[s : s + chunk, None]
        p, r = a[s : s + chunk, None, :], (b - a)[s : s + chunk, None, :]
        q, e = a[None, :, :], (b - a)[None, :, :]
        den = r[..., 0] * e[..., 1] - r[..., 1] * e[..., 0]
        w = q - p
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (w[..., 0] * e[..., 1] - w[..., 1] * e[..., 0]) / den
            u = (w[..., 0] * r[..., 1] - w[..., 1] * r[..., 0]) / den
        adjacent = (idx[None, :] == i) | (idx[None, :] == (i + 1) % m) | ((idx[None, :] + 1) % m == i)
        hit = (den != 0) & (t > 1e-12) & (t < 1 - 1e-12) & (u > 1e-12) & (u < 1 - 1e-12) & ~adjacent
        if hit.any():
            return True
    return False


# --------------------------------------------------------------------------
# queries


def boundary_distance(domain, p) -> float:
    """Unsigned distance from p to the boundary (walls included)."""
    x, y = as_point(p)
    if isinstance(domain, Disk):
        return abs(domain.radius - math.hypot(x - domain.center[0], y - domain.center[1]))
    if isinstance(domain, Interval):
        return min(abs(x), abs(domain.ell - x))
    ix = domain.index
    d, _ = gk.nearest_segment(x, y, *ix)
    return d


def contains(domain, p) -> bool:
    """True iff p lies in the open domain; boundary and wall points are outside."""
    x, y = as_point(p)
    if isinstance(domain, Disk):
        return math.hypot(x - domain.center[0], y - domain.center[1]) < domain.radius
    if isinstance(domain, Interval):
        return 0.0 < x < domain.ell and y == 0.0
    if not gk.point_in_ring(x, y, domain.vertices):
        return False
    return boundary_distance(domain, (x, y)) > 0.0


def contains_many(domain, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    return np.array([contains(domain, q) for q in pts], dtype=bool)


def winding_number(vertices: np.ndarray, p) -> int:
    """Winding number of the closed ring around p (independent of ray casting)."""
    v = np.asarray(vertices, dtype=np.float64) - np.asarray(p, dtype=np.float64)
    ang = np.arctan2(v[:, 1], v[:, 0])
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(d.sum() / (2 * np.pi)))


def _in_closure(domain, p, tol: float = 1e-12) -> bool:
    if contains(domain, p):
        return True
    if isinstance(domain, Interval):
        return -tol <= p[0] <= domain.ell + tol and p[1] == 0.0
    if isinstance(domain, Disk):
        return math.hypot(p[0] - domain.center[0], p[1] - domain.center[1]) <= domain.radius * (1.0 + tol)
    return boundary_distance(domain, p) <= tol


def reflect_step(domain, start, end, max_iter: int = REFLECT_MAX_ITER) -> Point:
    """Move from ``start`` toward ``end``, specularly reflecting off the boundary.

    The start must be interior; the result may land on the boundary itself.
    Raises ReflectionCapError when the reflection does not settle within
    ``max_iter`` bounces.
    """
    p = as_point(start)
    q = as_point(end)
    if not contains(domain, p):
        raise GeometryError(f"start point {tuple(p)} is not inside the domain")
    if isinstance(domain, Interval):
        return Point(_fold_interval(q.x, domain.ell), 0.0)
    if isinstance(domain, Disk):
        x, y, ok = _reflect_disk(p, q, domain, max_iter)
    else:
        x, y, ok = gk.reflect_path(p.x, p.y, q.x, q.y, *domain.index, max_iter)
    if not ok or not _in_closure(domain, (x, y)):
        raise ReflectionCapError(
            f"reflection from {tuple(p)} toward {tuple(q)} did not settle inside the domain"
        )
    return Point(x, y)


def _fold_interval(x: float, ell: float) -> float:
    period = 2.0 * ell
    x = math.fmod(x, period)
    if x < 0:
        x += period
    return period - x if x > ell else x


def _reflect_disk(p: Point, q: Point, disk: Disk, max_iter: int):
    cx, cy = disk.center
    R = disk.radius
    px, py = p.x - cx, p.y - cy
    qx, qy = q.x - cx, q.y - cy
    for _ in range(max_iter):
        if qx * qx + qy * qy <= R * R:
            return qx + cx, qy + cy, True
        rx, ry = qx - px, qy - py
        A = rx * rx + ry * ry
        B = 2 * (px * rx + py * ry)
        C = px * px + py * py - R * R
        s = (-B + math.sqrt(max(B * B - 4 * A * C, 0.0))) / (2 * A)
        hx, hy = px + s * rx, py + s * ry
        nx, ny = hx / R, hy / R
        vx, vy = qx - hx, qy - hy
        dot = vx * nx + vy * ny
        qx, qy = hx + vx - 2 * dot * nx, hy + vy - 2 * dot * ny
        # pull the hit point a hair inside so the next chord starts interior
        px, py = hx * (1 - 1e-15), hy * (1 - 1e-15)
    return qx + cx, qy + cy, False


def sample_uniform(domain, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in the domain by bounding-box rejection."""
    if isinstance(domain, Disk):
        r = domain.radius * np.sqrt(rng.random(n))
        th = 2 * np.pi * rng.random(n)
        return np.column_stack([domain.center[0] + r * np.cos(th), domain.center[1] + r * np.sin(th)])
    x0, y0, x1, y1 = domain.bbox
    out = np.empty((0, 2))
    while len(out) < n:
        k = max(2 * (n - len(out)), 64)
        cand = np.column_stack([x0 + (x1 - x0) * rng.random(k), y0 + (y1 - y0) * rng.random(k)])
        keep = _inside_ring_many(domain.vertices, cand)
        out = np.concatenate([out, cand[keep]])
    return out[:n]


def _inside_ring_many(vertices: np.ndarray, pts: np.ndarray) -> np.ndarray:
    from matplotlib.path import Path

    return Path(vertices).contains_points(pts)


# --------------------------------------------------------------------------
# export


def outline_rings(domain, disk_points: int = 720) -> list[np.ndarray]:
    """Ring 0 is the outer boundary; each wall is its own two-point ring."""
    if isinstance(domain, Disk):
        th = np.linspace(0, 2 * np.pi, disk_points, endpoint=False)
        return [np.column_stack([domain.center[0] + domain.radius * np.cos(th), domain.center[1] + domain.radius * np.sin(th)])]
    if isinstance(domain, Interval):
        return [np.array([[0.0, 0.0], [domain.ell, 0.0]])]
    return [domain.vertices] + [w for w in domain.walls]


def to_csv(domain) -> str:
    buf = io.StringIO()
    buf.write("ring_id,x,y\n")
    for rid, ring in enumerate(outline_rings(domain)):
        for x, y in ring:
            buf.write(f"{rid},{float(x)!r},{float(y)!r}\n")
    return buf.getvalue()


def to_svg(domain, size: int = 600, stroke: float = 1.0) -> str:
    rings = outline_rings(domain)
    allp = np.concatenate(rings)
    x0, y0 = allp.min(axis=0)
    x1, y1 = allp.max(axis=0)
    span = max(x1 - x0, y1 - y0, 1e-12)
    scale = 0.95 * size / span
    ox = 0.5 * (size - scale * (x1 - x0))
    oy = 0.5 * (size - scale * (y1 - y0))

    def tx(pt):
        # svg y axis points down
        return f"{ox + scale * (pt[0] - x0):.3f},{size - oy - scale * (pt[1] - y0):.3f}"

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
    outer = " ".join(tx(p) for p in rings[0])
    tag = "polygon" if len(rings[0]) > 2 else "polyline"
    parts.append(f'<{tag} points="{outer}" fill="none" stroke="black" stroke-width="{stroke}"/>')
    for ring in rings[1:]:
        parts.append(f'<polyline points="{" ".join(tx(p) for p in ring)}" fill="none" stroke="red" stroke-width="{stroke}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
