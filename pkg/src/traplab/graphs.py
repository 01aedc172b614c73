"""Sierpinski-gasket pre-fractal graphs SG(2), SG(3) and star graphs, with
exact exit-time and return-probability computations by linear algebra.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fitting import FitResult

SQ3 = math.sqrt(3.0)
MAX_VERTICES = 5_000_000
DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-10


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GraphModel:
    adjacency: tuple  # per-vertex int arrays of neighbours
    coords: np.ndarray | None = None
    absorbing: frozenset = frozenset()
    corners: tuple = ()
    name: str = ""

    @property
    def vertex_count(self) -> int:
        return len(self.adjacency)

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def with_absorbing(self, absorbing) -> "GraphModel":
        absorbing = frozenset(int(v) for v in absorbing)
        if not absorbing <= set(range(self.vertex_count)):
            raise GraphError("absorbing set must be a subset of the vertices")
        return GraphModel(self.adjacency, self.coords, absorbing, self.corners, self.name)

    def edges(self) -> np.ndarray:
        out = [(u, v) for u, nb in enumerate(self.adjacency) for v in nb if u < v]
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    def adjacency_matrix(self) -> sp.csr_matrix:
        n = self.vertex_count
        deg = np.array([len(a) for a in self.adjacency])
        rows = np.repeat(np.arange(n), deg)
        cols = np.concatenate(self.adjacency) if n else np.zeros(0, dtype=np.int64)
        return sp.csr_matrix((np.ones(len(cols)), (rows, cols)), shape=(n, n))

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=float)

    def csr(self):
        """(indptr, indices) arrays for compiled walkers."""
        deg = np.array([len(a) for a in self.adjacency], dtype=np.int64)
        indptr = np.zeros(len(deg) + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        indices = np.concatenate(self.adjacency).astype(np.int64)
        return indptr, indices

    def validate(self) -> None:
        A = self.adjacency_matrix()
        if (A != A.T).nnz:
            raise GraphError("adjacency is not symmetric")
        if A.diagonal().any():
            raise GraphError("self-loops present")
        ncomp, _ = sp.csgraph.connected_components(A, directed=False)
        if ncomp != 1:
            raise GraphError(f"graph has {ncomp} components")


def _from_edge_list(n: int, edges: np.ndarray) -> tuple:
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    nb = [[] for _ in range(n)]
    for u, v in edges:
        nb[u].append(v)
        nb[v].append(u)
    return tuple(np.array(sorted(a), dtype=np.int64) for a in nb)


# triangular-lattice integer coordinates: (i, j) -> i*(1, 0) + j*(1/2, sqrt3/2)
def _lattice_to_xy(ij: np.ndarray, scale: float) -> np.ndarray:
    i = ij[:, 0].astype(float)
    j = ij[:, 1].astype(float)
    return np.column_stack([(i + 0.5 * j) / scale, (SQ3 / 2) * j / scale])


def _gasket(offsets: np.ndarray, m: int, level: int, name: str) -> GraphModel:
    """Gasket graph from similarity offsets in lattice units of the level-1 cell.

    Each map is x -> x/m + offset. Triangles are tracked by their lower-left
    corner in units of m**-level; the unit triangle has corners (0,0), (1,0), (0,1).
    """
    corners = np.zeros((1, 2), dtype=np.int64)
    for _ in range(level):
        # refine the lattice by m; every triangle splits into len(offsets) unit cells
        corners = (corners[:, None, :] * m + offsets[None, :, :]).reshape(-1, 2)
    n_tri = len(corners)
    tri = np.stack([corners, corners + [1, 0], corners + [0, 1]], axis=1).reshape(-1, 2)
    verts, inv = np.unique(tri, axis=0, return_inverse=True)
    inv = inv.reshape(n_tri, 3)
    if len(verts) > MAX_VERTICES:
        raise GraphError(f"{name} level {level} exceeds vertex cap")
    edges = np.concatenate([inv[:, [0, 1]], inv[:, [1, 2]], inv[:, [0, 2]]])
    adj = _from_edge_list(len(verts), edges)
    full = m**level
    lookup = {tuple(v): k for k, v in enumerate(map(tuple, verts))}
    corner_ids = (lookup[(0, 0)], lookup[(full, 0)], lookup[(0, full)])
    return GraphModel(adjacency=adj, coords=_lattice_to_xy(verts, full), corners=corner_ids, name=f"{name}-{level}")


# SG(2): maps to the three corner subtriangles
_SG2_OFFSETS = np.array([[0, 0], [1, 0], [0, 1]], dtype=np.int64)
# SG(3): a0, a1, a2 corner cells and the cells at c0, c6, c5 (upward triangles only)
_SG3_OFFSETS = np.array([[0, 0], [2, 0], [0, 2], [1, 0], [1, 1], [0, 1]], dtype=np.int64)


def build_sg_graph(variant: str, level: int) -> GraphModel:
    """Level-``level`` SG(2) or SG(3) graph with corners a0, a1, a2 recorded."""
    if level < 0 or int(level) != level:
        raise GraphError("level must be a nonnegative integer")
    v = variant.upper().replace("(", "").replace(")", "")
    if v == "SG2":
        if 3 * (3**level + 1) // 2 > MAX_VERTICES:
            raise GraphError(f"SG2 level {level} exceeds vertex cap")
        return _gasket(_SG2_OFFSETS, 2, level, "SG2")
    if v == "SG3":
        if 6**level > MAX_VERTICES:
            raise GraphError(f"SG3 level {level} exceeds vertex cap")
        return _gasket(_SG3_OFFSETS, 3, level, "SG3")
    raise GraphError(f"unknown gasket variant {variant!r}")


def build_star_graph(edges: int, ell: float, mesh: int) -> GraphModel:
    """Star with a hub (vertex 0) and ``edges`` rays of ``mesh`` vertices each."""
    if edges < 1 or mesh < 2 or not ell > 0:
        raise GraphError("star graph needs edges >= 1, mesh >= 2, ell > 0")
    n = 1 + edges * mesh
    pairs = []
    coords = np.zeros((n, 2))
    outer = []
    for k in range(edges):
        ang = 2 * math.pi * k / edges
        prev = 0
        for j in range(1, mesh + 1):
            v = 1 + k * mesh + (j - 1)
            pairs.append((prev, v))
            coords[v] = (j * ell / mesh * math.cos(ang), j * ell / mesh * math.sin(ang))
            prev = v
        outer.append(prev)
    adj = _from_edge_list(n, np.array(pairs))
    return GraphModel(adjacency=adj, coords=coords, absorbing=frozenset(outer), corners=(0,), name=f"star-{edges}")


def build_path_graph(n: int, spacing: float = 1.0) -> GraphModel:
    """Path 0 - 1 - ... - (n-1) on the x axis; both ends are recorded as corners."""
    if n < 2:
        raise GraphError("path graph needs at least two vertices")
    pairs = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    coords = np.column_stack([spacing * np.arange(n, dtype=float), np.zeros(n)])
    return GraphModel(adjacency=_from_edge_list(n, pairs), coords=coords, corners=(0, n - 1), name=f"path-{n}")


def graph_time_scale(spacing: float, diffusivity: float = 1.0) -> float:
    """Continuum time carried by one walk step on a lattice of the given spacing."""
    return spacing**2 / (2.0 * diffusivity)


# --------------------------------------------------------------------------
# exact computations


@dataclass(frozen=True)
class ExitTimeTable:
    m: np.ndarray
    absorbing: frozenset
    residual: float = 0.0
    method: str = ""

    def __getitem__(self, v):
        return self.m[v]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("vertex,m\n")
        for v, x in enumerate(self.m):
            buf.write(f"{v},{float(x)!r}\n")
        return buf.getvalue()


def mean_exit_time_exact(g: GraphModel, absorbing=None) -> ExitTimeTable:
    """Expected simple-random-walk steps to the absorbing set from every vertex.

    Solves the Dirichlet problem L m = deg on the free vertices, where L is the
    combinatorial Laplacian; this is (I - P) m = 1 scaled by the degrees, and is
    symmetric positive definite.
    """
    if absorbing is not None:
        g = g.with_absorbing(absorbing)
    if not g.absorbing:
        raise GraphError("absorbing set is empty")
    n = g.vertex_count
    A = g.adjacency_matrix()
    deg = np.asarray(A.sum(axis=1)).ravel()
    free = np.array(sorted(set(range(n)) - set(g.absorbing)), dtype=np.int64)
    if len(free) == 0:
        return ExitTimeTable(np.zeros(n), g.absorbing, 0.0, "trivial")
    L = (sp.diags(deg) - A).tocsr()[free][:, free]
    b = deg[free]
    if len(free) < DENSE_LIMIT:
        try:
            x = np.linalg.solve(L.toarray(), b)
        except np.linalg.LinAlgError as exc:
            raise GraphError("singular exit system: a component has no absorbing vertex") from exc
        method = "dense"
    else:
        x, info = spla.cg(L, b, rtol=1e-15, atol=0.0, maxiter=20 * len(free))
        method = "cg"
        if info != 0 or _residual(L, x, b, deg[free]) > RESIDUAL_TOL:
            x = spla.splu(L.tocsc()).solve(b)
            method = "splu"
    m = np.zeros(n)
    m[free] = x
    res = _residual(L, x, b, deg[free])
    if not np.isfinite(res) or res > 1e3 * RESIDUAL_TOL:
        raise GraphError(f"exit system residual {res:.3g}: singular or disconnected")
    return ExitTimeTable(m, g.absorbing, res, method)


def _residual(L, x, b, d) -> float:
    # residual of (I - P) m = 1, i.e. of L m = deg divided by the degree
    return float(np.max(np.abs((L @ x - b) / d)))


def mean_value_defect(g: GraphModel, table: ExitTimeTable) -> float:
    """max |m(v) - 1 - mean_{u~v} m(u)| over free vertices."""
    worst = 0.0
    for v, nb in enumerate(g.adjacency):
        if v in table.absorbing:
            continue
        worst = max(worst, abs(table.m[v] - 1.0 - table.m[nb].mean()))
    return worst


def corner_exit_times(variant: str, levels) -> np.ndarray:
    """Exit steps from corner a0 to {a1, a2} on successive gasket levels."""
    out = []
    for n in levels:
        g = build_sg_graph(variant, n)
        a0, a1, a2 = g.corners
        out.append(mean_exit_time_exact(g, {a1, a2})[a0])
    return np.array(out)


def return_probability(g: GraphModel, v: int, steps: int) -> np.ndarray:
    """p_n(v, v) for n = 0..steps of the lazy walk (holding probability 1/2)."""
    if steps < 0:
        raise GraphError("steps must be nonnegative")
    A = g.adjacency_matrix()
    deg = np.asarray(A.sum(axis=1)).ravel()
    # row vector mu_{n+1} = mu_n (I + P)/2 with P = D^{-1} A
    PT = (A.multiply(1.0 / deg[:, None])).T.tocsr()
    mu = np.zeros(g.vertex_count)
    mu[v] = 1.0
    out = np.empty(steps + 1)
    out[0] = 1.0
    for n in range(1, steps + 1):
        mu = 0.5 * (mu + PT @ mu)
        out[n] = mu[v]
    return out


def lazy_distribution(g: GraphModel, v: int, steps: int) -> np.ndarray:
    A = g.adjacency_matrix()
    deg = np.asarray(A.sum(axis=1)).ravel()
    PT = (A.multiply(1.0 / deg[:, None])).T.tocsr()
    mu = np.zeros(g.vertex_count)
    mu[v] = 1.0
    for _ in range(steps):
        mu = 0.5 * (mu + PT @ mu)
    return mu


def walk_dimension_from_ratios(exit_times, length_factor: float) -> FitResult:
    """Walk dimension log(mean successive exit-time ratio) / log(length factor)."""
    t = np.asarray(exit_times, dtype=float)
    if len(t) < 2:
        raise GraphError("need exit times for at least two levels")
    if np.any(t <= 0):
        raise GraphError("exit times must be positive")
    if not length_factor > 1:
        raise GraphError("length factor must exceed 1")
    ratios = t[1:] / t[:-1]
    lf = math.log(length_factor)
    dw = math.log(ratios.mean()) / lf
    lr = np.log(ratios) / lf
    se = float(lr.std(ddof=1) / math.sqrt(len(lr))) if len(lr) > 1 else 0.0
    k = np.arange(len(t))
    z = np.log(t)
    if len(t) > 2 and z.std() > 0:
        r2 = float(np.corrcoef(k, z)[0, 1] ** 2)
    else:
        r2 = 1.0
    return FitResult(
        exponent=dw,
        coefficient=float(t[0]),
        std_err=se,
        r_squared=r2,
        t_window=(1.0, float(length_factor) ** (len(t) - 1)),
        n_points=len(t),
    )


def graph_csv(g: GraphModel) -> tuple[str, str]:
    """(edge list CSV, vertex coordinate CSV)."""
    e = io.StringIO()
    e.write("u,v\n")
    for u, v in g.edges():
        e.write(f"{u},{v}\n")
    c = io.StringIO()
    c.write("vertex,x,y\n")
    if g.coords is not None:
        for k, (x, y) in enumerate(g.coords):
            c.write(f"{k},{float(x)!r},{float(y)!r}\n")
    return e.getvalue(), c.getvalue()
