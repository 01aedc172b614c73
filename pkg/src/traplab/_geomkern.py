"""Compiled segment-set primitives shared by the geometry and path engines.

A segment set is ``segs[m, 4] = (x1, y1, x2, y2)`` plus a uniform grid in CSR
form (``cstart``, ``citems``) mapping each cell to the segments overlapping it.
"""
import math

import numpy as np
from numba import njit

EPS_PARAM = 1e-12


@njit(cache=True, nogil=True)
def seg_dist2(px, py, x1, y1, x2, y2):
    ex = x2 - x1
    ey = y2 - y1
    L2 = ex * ex + ey * ey
    if L2 == 0.0:
        dx = px - x1
        dy = py - y1
        return dx * dx + dy * dy
    u = ((px - x1) * ex + (py - y1) * ey) / L2
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    dx = px - (x1 + u * ex)
    dy = py - (y1 + u * ey)
    return dx * dx + dy * dy


@njit(cache=True, nogil=True)
def nearest_segment(px, py, segs, gx0, gy0, cell, nx, ny, cstart, citems):
    """Distance from (px, py) to the closest segment and that segment's index."""
    m = segs.shape[0]
    ci = int(math.floor((px - gx0) / cell))
    cj = int(math.floor((py - gy0) / cell))
    best = np.inf
    bi = -1
    if ci < 0 or cj < 0 or ci >= nx or cj >= ny:
        for k in range(m):
            d2 = seg_dist2(px, py, segs[k, 0], segs[k, 1], segs[k, 2], segs[k, 3])
            if d2 < best:
                best = d2
                bi = k
        return math.sqrt(best), bi
    kmax = max(nx, ny)
    for r in range(kmax + 1):
        for i in range(ci - r, ci + r + 1):
            if i < 0 or i >= nx:
                continue
            for j in range(cj - r, cj + r + 1):
                if j < 0 or j >= ny:
                    continue
                if abs(i - ci) != r and abs(j - cj) != r:
                    continue
                c = i * ny + j
                for q in range(cstart[c], cstart[c + 1]):
                    k = citems[q]
                    d2 = seg_dist2(px, py, segs[k, 0], segs[k, 1], segs[k, 2], segs[k, 3])
                    if d2 < best:
                        best = d2
                        bi = k
        # every cell outside ring r is at least r*cell away
        if bi >= 0 and best <= (r * cell) * (r * cell):
            break
    return math.sqrt(best), bi


@njit(cache=True, nogil=True)
def first_crossing(px, py, qx, qy, segs, gx0, gy0, cell, nx, ny, cstart, citems, skip):
    """Smallest parameter s in (0, 1] at which p->q meets a segment (index != skip).

    Returns (s, index); index is -1 when the step crosses nothing.
    """
    rx = qx - px
    ry = qy - py
    i0 = int(math.floor((min(px, qx) - gx0) / cell))
    i1 = int(math.floor((max(px, qx) - gx0) / cell))
    j0 = int(math.floor((min(py, qy) - gy0) / cell))
    j1 = int(math.floor((max(py, qy) - gy0) / cell))
    i0 = max(i0, 0)
    j0 = max(j0, 0)
    i1 = min(i1, nx - 1)
    j1 = min(j1, ny - 1)
    best_s = 2.0
    bi = -1
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            c = i * ny + j
            for q in range(cstart[c], cstart[c + 1]):
                k = citems[q]
                if k == skip:
                    continue
                ax = segs[k, 0]
                ay = segs[k, 1]
                ex = segs[k, 2] - ax
                ey = segs[k, 3] - ay
                den = rx * ey - ry * ex
                if den == 0.0:
                    continue
                wx = ax - px
                wy = ay - py
                s = (wx * ey - wy * ex) / den
                if s <= EPS_PARAM or s > 1.0 or s >= best_s:
                    continue
                u = (wx * ry - wy * rx) / den
                if u < 0.0 or u > 1.0:
                    continue
                best_s = s
                bi = k
    return best_s, bi


@njit(cache=True, nogil=True)
def reflect_path(px, py, qx, qy, segs, gx0, gy0, cell, nx, ny, cstart, citems, max_iter):
    """Specular reflection of the step p->q off the segment set.

    Returns (x, y, ok); ok is False when the iteration cap was hit.
    """
    skip = -1
    for _ in range(max_iter):
        s, k = first_crossing(px, py, qx, qy, segs, gx0, gy0, cell, nx, ny, cstart, citems, skip)
        if k < 0:
            return qx, qy, True
        cx = px + s * (qx - px)
        cy = py + s * (qy - py)
        ex = segs[k, 2] - segs[k, 0]
        ey = segs[k, 3] - segs[k, 1]
        L = math.sqrt(ex * ex + ey * ey)
        ex /= L
        ey /= L
        vx = qx - cx
        vy = qy - cy
        u = ((cx - segs[k, 0]) * ex + (cy - segs[k, 1]) * ey) / L
        if u < EPS_PARAM or u > 1.0 - EPS_PARAM:
            # exact vertex hit: no single tangent, send the overshoot straight back
            qx = cx - vx
            qy = cy - vy
        else:
            dot = vx * ex + vy * ey
            qx = cx + 2.0 * dot * ex - vx
            qy = cy + 2.0 * dot * ey - vy
        px = cx
        py = cy
        skip = k
    return qx, qy, False


@njit(cache=True, nogil=True)
def point_in_ring(px, py, ring):
    """Even-odd ray casting against a closed ring given as an (n, 2) array."""
    n = ring.shape[0]
    inside = False
    j = n - 1
    for i in range(n):
        xi = ring[i, 0]
        yi = ring[i, 1]
        xj = ring[j, 0]
        yj = ring[j, 1]
        if (yi > py) != (yj > py):
            xc = xi + (py - yi) * (xj - xi) / (yj - yi)
            if px < xc:
                inside = not inside
        j = i
    return inside


def build_grid(segs, target_per_cell=2.0, max_cells=1 << 18):
    """Uniform-grid CSR index over a segment array."""
    segs = np.ascontiguousarray(segs, dtype=np.float64)
    m = segs.shape[0]
    xs = np.concatenate([segs[:, 0], segs[:, 2]])
    ys = np.concatenate([segs[:, 1], segs[:, 3]])
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    span = max(x1 - x0, y1 - y0, 1e-12)
    lengths = np.hypot(segs[:, 2] - segs[:, 0], segs[:, 3] - segs[:, 1])
    cell = max(float(np.median(lengths)) * target_per_cell, span / math.sqrt(max_cells))
    cell = min(cell, span)
    pad = 1e-9 * span + 1e-300
    gx0 = x0 - pad
    gy0 = y0 - pad
    nx = int(math.floor((x1 + pad - gx0) / cell)) + 1
    ny = int(math.floor((y1 + pad - gy0) / cell)) + 1
    i0 = np.floor((np.minimum(segs[:, 0], segs[:, 2]) - gx0) / cell).astype(np.int64)
    i1 = np.floor((np.maximum(segs[:, 0], segs[:, 2]) - gx0) / cell).astype(np.int64)
    j0 = np.floor((np.minimum(segs[:, 1], segs[:, 3]) - gy0) / cell).astype(np.int64)
    j1 = np.floor((np.maximum(segs[:, 1], segs[:, 3]) - gy0) / cell).astype(np.int64)
    cells = []
    items = []
    for k in range(m):
        ii, jj = np.meshgrid(np.arange(i0[k], i1[k] + 1), np.arange(j0[k], j1[k] + 1), indexing="ij")
        cells.append((ii * ny + jj).ravel())
        items.append(np.full(ii.size, k, dtype=np.int64))
    cells = np.concatenate(cells)
    items = np.concatenate(items)
    order = np.argsort(cells, kind="stable")
    cells = cells[order]
    items = items[order]
    counts = np.bincount(cells, minlength=nx * ny)
    cstart = np.zeros(nx * ny + 1, dtype=np.int64)
    np.cumsum(counts, out=cstart[1:])
    return segs, float(gx0), float(gy0), float(cell), nx, ny, cstart, items.astype(np.int64)
