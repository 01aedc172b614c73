"""Compiled trajectory kernels.

Every kernel draws from the ``numpy.random.Generator`` it is handed, so a batch
is a pure function of its inputs and that generator's state. Domain kinds: 0 polygon (segment index),
1 disk, 2 interval [0, ell] (y ignored).
"""
import math

import numpy as np
from numba import njit

from ._geomkern import first_crossing, nearest_segment, reflect_path, seg_dist2

POLYGON = 0
DISK = 1
INTERVAL = 2

# status codes
EXITED = 0
ALIVE = 1
CENSORED = 2
REFLECT_CAP = 3

# bridge crossings with probability below exp(-BRIDGE_CUT) are not drawn
BRIDGE_CUT = 40.0


@njit(cache=True, nogil=True, inline="always")
def _distance(kind, x, y, segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell):
    if kind == POLYGON:
        d, _ = nearest_segment(x, y, segs, gx0, gy0, cell, nx, ny, cstart, citems)
        return d
    if kind == DISK:
        return R - math.hypot(x - cx, y - cy)
    return min(x, ell - x)


@njit(cache=True, nogil=True)
def _project_boundary(kind, x, y, segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell):
    """Nearest boundary point, used as the exit point when the bridge test kills inside a step."""
    if kind == POLYGON:
        _, k = nearest_segment(x, y, segs, gx0, gy0, cell, nx, ny, cstart, citems)
        ax = segs[k, 0]
        ay = segs[k, 1]
        ex = segs[k, 2] - ax
        ey = segs[k, 3] - ay
        u = ((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey)
        u = min(max(u, 0.0), 1.0)
        return ax + u * ex, ay + u * ey
    if kind == DISK:
        r = math.hypot(x - cx, y - cy)
        if r == 0.0:
            return cx + R, cy
        return cx + (x - cx) * R / r, cy + (y - cy) * R / r
    return (0.0 if x < ell - x else ell), y


@njit(cache=True, nogil=True)
def killed_kernel(
    kind, sx, sy, segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell,
    D, h, adaptive, c_step, h_min, t_max, max_steps, bridge, far, rng,
    out_t, out_x, out_y, out_status, rec, rec_every,
):
    n = sx.shape[0]
    nrec = 0
    for i in range(n):
        x = sx[i]
        y = sy[i]
        t = 0.0
        steps = 0
        d = _distance(kind, x, y, segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell)
        status = ALIVE
        if d <= 0.0:
            status = EXITED
        while status == ALIVE:
            if t >= t_max:
                break
            if steps >= max_steps:
                status = CENSORED
                break
            if adaptive:
                t_rem = t_max - t
                if d > far * math.sqrt(D * t_rem):
                    t = t_max
                    break
                hs = (d / c_step) ** 2 / (2.0 * D)
                if hs < h_min:
                    hs = h_min
                if hs > t_rem:
                    hs = t_rem
            else:
                hs = h
            s = math.sqrt(2.0 * D * hs)
            qx = x + s * rng.standard_normal()
            qy = y
            if kind != INTERVAL:
                qy = y + s * rng.standard_normal()
            crossed = False
            if kind == POLYGON:
                sc, k = first_crossing(x, y, qx, qy, segs, gx0, gy0, cell, nx, ny, cstart, citems, -1)
                if k >= 0:
                    crossed = True
                    qx = x + sc * (qx - x)
                    qy = y + sc * (qy - y)
            elif kind == DISK:
                rq = math.hypot(qx - cx, qy - cy)
                if rq >= R:
                    crossed = True
                    # segment-circle intersection
                    ax = x - cx
                    ay = y - cy
                    bx = qx - x
                    by = qy - y
                    A = bx * bx + by * by
                    B = 2.0 * (ax * bx + ay * by)
                    C = ax * ax + ay * ay - R * R
                    u = (-B + math.sqrt(max(B * B - 4.0 * A * C, 0.0))) / (2.0 * A)
                    qx = x + u * bx
                    qy = y + u * by
            else:
                if qx <= 0.0:
                    crossed = True
                    qx = 0.0
                elif qx >= ell:
                    crossed = True
                    qx = ell
            t += hs
            steps += 1
            x = qx
            y = qy
            if crossed:
                status = EXITED
                break
            d2 = _distance(kind, x, y, segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell)
            if bridge:
                z = d * d2 / (D * hs)
                if z < BRIDGE_CUT and rng.random() < math.exp(-z):
                    status = EXITED
                    x, y = _project_boundary(kind, x, y, segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell)
                    break
            d = d2
            if rec_every > 0 and steps % rec_every == 0 and nrec < rec.shape[0]:
                rec[nrec, 0] = t
                rec[nrec, 1] = x
                rec[nrec, 2] = y
                nrec += 1
        out_t[i] = t
        out_x[i] = x
        out_y[i] = y
        out_status[i] = status
    return nrec


@njit(cache=True, nogil=True)
def _zone_move(rng, x, y, zx, zy, tx, ty, nxv, nyv, r_in, log_den, D):
    """Sub-grid opening: resolve one visit to a zone of radius 2 r_in.

    Returns the new position on the outer circle and the elapsed mean time.
    """
    R = 2.0 * r_in
    px = x - zx
    py = y - zy
    # local frame: tangent along the wall, normal across it
    u = px * tx + py * ty
    v = px * nxv + py * nyv
    r = math.hypot(u, v)
    side = 1.0 if v >= 0.0 else -1.0
    if r < 1e-300:
        r = 1e-300
    p = math.log(R / r) / log_den
    if p > 1.0:
        p = 1.0
    if rng.random() < 0.5 * p:
        phi = math.pi * rng.random()
        wu = math.cos(phi)
        wv = -side * math.sin(phi)
    else:
        # exit point of planar BM from the disk: Moebius image of a uniform angle
        zu = u / R
        zv = v / R
        psi = 2.0 * math.pi * rng.random()
        cu = math.cos(psi)
        cv = math.sin(psi)
        nu = cu + zu
        nv = cv + zv
        # den = 1 + conj(z) * c
        du = 1.0 + zu * cu + zv * cv
        dv = zu * cv - zv * cu
        dd = du * du + dv * dv
        wu = (nu * du + nv * dv) / dd
        wv = (nv * du - nu * dv) / dd
        if wv * side < 0.0:
            wv = -wv
    dt = (R * R - r * r) / (4.0 * D)
    return zx + R * (wu * tx + wv * nxv), zy + R * (wu * ty + wv * nyv), dt


@njit(cache=True, nogil=True)
def reflected_kernel(
    kind, sx, sy, segs, gx0, gy0, cell, nx, ny, cstart, citems, feat, cx, cy, R, ell,
    bx, by, br, zones, D, h, adaptive, c_step, h_min, h_max, t_max, max_steps, max_reflect, rng,
    out_t, out_x, out_y, out_status,
):
    """Reflected BM run until it meets the closed ball (bx, by, br) or t_max.

    ``zones`` rows: (zx, zy, tx, ty, nx, ny, r_in, log_den) for sub-grid openings.
    """
    n = sx.shape[0]
    nz = zones.shape[0]
    has_ball = br >= 0.0
    for i in range(n):
        x = sx[i]
        y = sy[i]
        t = 0.0
        steps = 0
        status = ALIVE
        if has_ball and math.hypot(x - bx, y - by) <= br:
            status = EXITED
        while status == ALIVE:
            if t >= t_max:
                break
            if steps >= max_steps:
                status = CENSORED
                break
            if adaptive:
                floor = 0.0
                if kind == POLYGON:
                    d, k = nearest_segment(x, y, segs, gx0, gy0, cell, nx, ny, cstart, citems)
                    floor = feat[k]
                else:
                    d = _distance(kind, x, y, segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell)
                    floor = feat[0]
                if d < floor:
                    d = floor
                if has_ball:
                    db = math.hypot(x - bx, y - by) - br
                    if db < d:
                        d = db
                for j in range(nz):
                    dz = math.hypot(x - zones[j, 0], y - zones[j, 1]) - zones[j, 6]
                    if dz < d:
                        d = dz
                hs = (d / c_step) ** 2 / (2.0 * D)
                if hs > h_max:
                    hs = h_max
                if hs < h_min:
                    hs = h_min
            else:
                hs = h
            if hs > t_max - t:
                hs = t_max - t
            s = math.sqrt(2.0 * D * hs)
            qx = x + s * rng.standard_normal()
            qy = y
            if kind != INTERVAL:
                qy = y + s * rng.standard_normal()
            if has_ball and seg_dist2(bx, by, x, y, qx, qy) <= br * br:
                t += hs
                # first point of the step inside the ball
                ex = qx - x
                ey = qy - y
                A = ex * ex + ey * ey
                B = 2.0 * ((x - bx) * ex + (y - by) * ey)
                C = (x - bx) ** 2 + (y - by) ** 2 - br * br
                u = 0.0
                if A > 0.0:
                    u = max(0.0, (-B - math.sqrt(max(B * B - 4.0 * A * C, 0.0))) / (2.0 * A))
                x = x + u * ex
                y = y + u * ey
                status = EXITED
                break
            if kind == POLYGON:
                qx, qy, ok = reflect_path(x, y, qx, qy, segs, gx0, gy0, cell, nx, ny, cstart, citems, max_reflect)
                if not ok:
                    status = REFLECT_CAP
                    break
            elif kind == DISK:
                rq = math.hypot(qx - cx, qy - cy)
                if rq > R:
                    f = (2.0 * R - rq) / rq
                    qx = cx + (qx - cx) * f
                    qy = cy + (qy - cy) * f
            else:
                for _ in range(64):
                    if qx < 0.0:
                        qx = -qx
                    elif qx > ell:
                        qx = 2.0 * ell - qx
                    else:
                        break
            x = qx
            y = qy
            t += hs
            steps += 1
            for j in range(nz):
                if math.hypot(x - zones[j, 0], y - zones[j, 1]) < zones[j, 6]:
                    x, y, dt = _zone_move(
                        rng, x, y, zones[j, 0], zones[j, 1], zones[j, 2], zones[j, 3],
                        zones[j, 4], zones[j, 5], zones[j, 6], zones[j, 7], D,
                    )
                    t += dt
                    break
        out_t[i] = t
        out_x[i] = x
        out_y[i] = y
        out_status[i] = status


@njit(cache=True, nogil=True)
def local_time_kernel(
    x0s, ell, D, h, t_max, max_steps, bridge, rng, out_t, out_x, out_g, out_status, rec, rec_every,
):
    """Reflected BM on [0, ell) via Skorokhod's map, absorbed at ell.

    X = x0 + M + g with g_t = max(0, -min_{s<=t}(x0 + M_s)); the in-step
    minimum of M is drawn from the Brownian-bridge law, so g is exact in law
    at grid times.
    """
    n = x0s.shape[0]
    sig = math.sqrt(2.0 * D * h)
    var = 2.0 * D * h
    nrec = 0
    for i in range(n):
        x0 = x0s[i]
        y = x0  # free path x0 + M
        m = x0  # running minimum of the free path
        g = 0.0
        X = x0
        t = 0.0
        steps = 0
        status = ALIVE
        if X >= ell:
            status = EXITED
        if rec_every > 0 and nrec < rec.shape[0]:
            rec[nrec, 0] = 0.0
            rec[nrec, 1] = X
            rec[nrec, 2] = g
            nrec += 1
        while status == ALIVE:
            if t >= t_max - 1e-12 * h:
                break
            if steps >= max_steps:
                status = CENSORED
                break
            y1 = y + sig * rng.standard_normal()
            lo = 0.5 * (y + y1 - math.sqrt((y1 - y) ** 2 - 2.0 * var * math.log(1.0 - rng.random())))
            if lo < m:
                m = lo
            g1 = -m if m < 0.0 else 0.0
            X1 = y1 + g1
            t += h
            steps += 1
            if X1 >= ell:
                status = EXITED
                X1 = ell
            elif bridge and g1 == g:
                z = (ell - X) * (ell - X1) / (D * h)
                if z < BRIDGE_CUT and rng.random() < math.exp(-z):
                    status = EXITED
            y = y1
            g = g1
            X = X1
            if rec_every > 0 and steps % rec_every == 0 and nrec < rec.shape[0]:
                rec[nrec, 0] = t
                rec[nrec, 1] = X
                rec[nrec, 2] = g
                nrec += 1
        out_t[i] = t
        out_x[i] = X
        out_g[i] = g
        out_status[i] = status
    return nrec


@njit(cache=True, nogil=True)
def local_time_grid_kernel(x0, D, h, n_steps, rng, out_g):
    """Local-time path g at times k h (k = 0..n_steps) for reflected BM without absorption."""
    n = out_g.shape[0]
    sig = math.sqrt(2.0 * D * h)
    var = 2.0 * D * h
    for i in range(n):
        y = x0
        m = x0
        out_g[i, 0] = 0.0
        for k in range(1, n_steps + 1):
            y1 = y + sig * rng.standard_normal()
            lo = 0.5 * (y + y1 - math.sqrt((y1 - y) ** 2 - 2.0 * var * math.log(1.0 - rng.random())))
            if lo < m:
                m = lo
            out_g[i, k] = -m if m < 0.0 else 0.0
            y = y1


@njit(cache=True, nogil=True)
def walk_kernel(indptr, indices, cx, cy, start, targets, rng, out):
    """Simple random walk; squared displacement at each (sorted) target step count.

    ``targets[i]`` is the sorted step list for path i; negative entries are skipped.
    """
    n, m = targets.shape
    x0 = cx[start]
    y0 = cy[start]
    for i in range(n):
        v = start
        step = 0
        for j in range(m):
            tgt = targets[i, j]
            if tgt < 0:
                out[i, j] = np.nan
                continue
            while step < tgt:
                a = indptr[v]
                deg = indptr[v + 1] - a
                v = indices[a + rng.integers(0, deg)]
                step += 1
            dx = cx[v] - x0
            dy = cy[v] - y0
            out[i, j] = dx * dx + dy * dy


@njit(cache=True, nogil=True)
def distances_kernel(kind, xs, ys, segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell, out):
    for i in range(xs.shape[0]):
        out[i] = _distance(kind, xs[i], ys[i], segs, gx0, gy0, cell, nx, ny, cstart, citems, cx, cy, R, ell)
