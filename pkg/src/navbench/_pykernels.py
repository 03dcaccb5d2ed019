"""Pure-Python/numpy implementations of the hot kernels.

Mirrors ``_kernels.pyx`` operation-for-operation so that both backends give
the same answers; used when the compiled extension is unavailable or when
``NAVBENCH_PURE=1``.
"""
from __future__ import annotations

import heapq
import math

import numpy as np

# ---------------------------------------------------------------- cloth ----


def _collide(z, c, has_c, pinned):
    hit = has_c & ~pinned & (z < c)
    z[hit] = c[hit]
    pinned |= hit


def _relax_pairs(a, b, pa, pb):
    d = b - a
    move_a = ~pa
    move_b = ~pb
    a[...] = np.where(move_a, a + 0.5 * d, a)
    b[...] = np.where(move_b, b - 0.5 * d, b)


def _spring_pass(z, pinned):
    ny, nx = z.shape
    # disjoint pair batches: horizontal even/odd, then vertical even/odd
    _relax_pairs(z[:, 0:nx - 1:2], z[:, 1:nx:2], pinned[:, 0:nx - 1:2], pinned[:, 1:nx:2])
    _relax_pairs(z[:, 1:nx - 1:2], z[:, 2:nx:2], pinned[:, 1:nx - 1:2], pinned[:, 2:nx:2])
    _relax_pairs(z[0:ny - 1:2, :], z[1:ny:2, :], pinned[0:ny - 1:2, :], pinned[1:ny:2, :])
    _relax_pairs(z[1:ny - 1:2, :], z[2:ny:2, :], pinned[1:ny - 1:2, :], pinned[2:ny:2, :])


def cloth_relax(z0, constraint, has_c, drop, rigidness, max_iter, eps):
    """Relax an (inverted-frame) cloth; returns ``(heights, pinned, iterations)``."""
    z = np.array(z0, dtype=float, copy=True)
    c = np.asarray(constraint, dtype=float)
    has_c = np.asarray(has_c, dtype=bool)
    pinned = np.zeros(z.shape, dtype=bool)
    it = 0
    while it < max_iter:
        it += 1
        prev = z.copy()
        z[~pinned] -= drop
        _collide(z, c, has_c, pinned)
        for _ in range(rigidness):
            _spring_pass(z, pinned)
        _collide(z, c, has_c, pinned)
        if np.max(np.abs(z - prev)) < eps:
            break
    return z, pinned.astype(np.uint8), it


# ---------------------------------------------------------------- A* -------

_NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
SQRT2 = math.sqrt(2.0)


def astar_grid(blocked, sr, sc, gr, gc):
    """8-connected A* on a boolean grid in cell units.

    Diagonal moves may not cut blocked corners. Returns an ``(K, 2)`` array of
    (row, col) or ``None`` when the goal is unreachable.
    """
    blocked = np.asarray(blocked, dtype=bool)
    h, w = blocked.shape
    if blocked[sr, sc] or blocked[gr, gc]:
        return None
    g = np.full(h * w, np.inf)
    parent = np.full(h * w, -1, dtype=np.int64)
    closed = np.zeros(h * w, dtype=bool)
    start, goal = sr * w + sc, gr * w + gc
    g[start] = 0.0
    heap = [(math.sqrt(float((sr - gr) ** 2 + (sc - gc) ** 2)), 0, start)]
    counter = 1
    while heap:
        _, _, cur = heapq.heappop(heap)
        if closed[cur]:
            continue
        closed[cur] = True
        if cur == goal:
            break
        r, c = divmod(cur, w)
        gc_ = g[cur]
        for dr, dc in _NEIGHBOURS:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w or blocked[nr, nc]:
                continue
            if dr != 0 and dc != 0:
                if blocked[r + dr, c] or blocked[r, c + dc]:
                    continue
                step = SQRT2
            else:
                step = 1.0
            nxt = nr * w + nc
            if closed[nxt]:
                continue
            ng = gc_ + step
            if ng < g[nxt]:
                g[nxt] = ng
                parent[nxt] = cur
                hr, hc = nr - gr, nc - gc
                heapq.heappush(heap, (ng + math.sqrt(float(hr * hr + hc * hc)), counter, nxt))
                counter += 1
    if not closed[goal]:
        return None
    out = [goal]
    while out[-1] != start:
        out.append(int(parent[out[-1]]))
    out.reverse()
    return np.array([divmod(i, w) for i in out], dtype=np.int64)


# ---------------------------------------------------------------- rays -----

_T_EPS = 1e-9


def _ray_boxes(o, d, t, pid, boxes, base):
    for i, (x0, x1, y0, y1, z0, z1) in enumerate(boxes):
        tn = np.full(len(d), -np.inf)
        tf = np.full(len(d), np.inf)
        ok = np.ones(len(d), dtype=bool)
        for ax, lo, hi in ((0, x0, x1), (1, y0, y1), (2, z0, z1)):
            dd = d[:, ax]
            par = dd == 0.0
            ok &= ~(par & ((o[ax] < lo) | (o[ax] > hi)))
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (lo - o[ax]) / dd
                tb = (hi - o[ax]) / dd
            t1 = np.where(par, -np.inf, np.minimum(ta, tb))
            t2 = np.where(par, np.inf, np.maximum(ta, tb))
            tn = np.maximum(tn, t1)
            tf = np.minimum(tf, t2)
        th = np.where(tn > _T_EPS, tn, np.where(tf > _T_EPS, 0.0, np.inf))
        hit = ok & (tn <= tf) & (th < t)
        t[hit] = th[hit]
        pid[hit] = base + i


def _ray_cylinders(o, d, t, pid, cyls, base):
    for i, (cx, cy, r, z0, z1) in enumerate(cyls):
        px, py = o[0] - cx, o[1] - cy
        a = d[:, 0] ** 2 + d[:, 1] ** 2
        b = 2.0 * (px * d[:, 0] + py * d[:, 1])
        c = px * px + py * py - r * r
        best = np.full(len(d), np.inf)
        disc = b * b - 4.0 * a * c
        good = (a > 0.0) & (disc >= 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            sq = np.sqrt(np.where(good, disc, 0.0))
            for tt in ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)):
                zz = o[2] + tt * d[:, 2]
                ok = good & (tt > _T_EPS) & (zz >= z0) & (zz <= z1)
                best = np.where(ok & (tt < best), tt, best)
            for zc in (z0, z1):
                tt = (zc - o[2]) / d[:, 2]
                xx = px + tt * d[:, 0]
                yy = py + tt * d[:, 1]
                ok = (d[:, 2] != 0.0) & (tt > _T_EPS) & (xx * xx + yy * yy <= r * r)
                best = np.where(ok & (tt < best), tt, best)
        hit = best < t
        t[hit] = best[hit]
        pid[hit] = base + i


def _ray_spheres(o, d, t, pid, spheres, base):
    for i, (cx, cy, cz, r) in enumerate(spheres):
        p = o - np.array([cx, cy, cz])
        a = np.einsum("ij,ij->i", d, d)
        b = 2.0 * (d @ p)
        c = float(p @ p) - r * r
        disc = b * b - 4.0 * a * c
        good = disc >= 0.0
        sq = np.sqrt(np.where(good, disc, 0.0))
        t1 = (-b - sq) / (2.0 * a)
        t2 = (-b + sq) / (2.0 * a)
        th = np.where(t1 > _T_EPS, t1, np.where(t2 > _T_EPS, 0.0, np.inf))
        hit = good & (th < t)
        t[hit] = th[hit]
        pid[hit] = base + i


def _ray_prisms(o, d, t, pid, planes, index, zr, base):
    for i in range(len(index)):
        start, count = index[i]
        tn = np.full(len(d), -np.inf)
        tf = np.full(len(d), np.inf)
        ok = np.ones(len(d), dtype=bool)
        for k in range(start, start + count):
            nx, ny, dd = planes[k]
            den = nx * d[:, 0] + ny * d[:, 1]
            num = dd - (nx * o[0] + ny * o[1])
            par = den == 0.0
            ok &= ~(par & (num < 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                tt = num / den
            tf = np.where(~par & (den > 0.0), np.minimum(tf, tt), tf)
            tn = np.where(~par & (den < 0.0), np.maximum(tn, tt), tn)
        z0, z1 = zr[i]
        dz = d[:, 2]
        par = dz == 0.0
        ok &= ~(par & ((o[2] < z0) | (o[2] > z1)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (z0 - o[2]) / dz
            tb = (z1 - o[2]) / dz
        tn = np.maximum(tn, np.where(par, -np.inf, np.minimum(ta, tb)))
        tf = np.minimum(tf, np.where(par, np.inf, np.maximum(ta, tb)))
        th = np.where(tn > _T_EPS, tn, np.where(tf > _T_EPS, 0.0, np.inf))
        hit = ok & (tn <= tf) & (th < t)
        t[hit] = th[hit]
        pid[hit] = base + i


def _cell_root(f0, f1, f2, t_in, t_out):
    """Smallest root of f2 t^2 + f1 t + f0 in [t_in, t_out] (vectorised), else inf."""
    out = np.full(f0.shape, np.inf)
    lin = np.abs(f2) < 1e-14
    with np.errstate(divide="ignore", invalid="ignore"):
        tl = -f0 / f1
        disc = f1 * f1 - 4.0 * f2 * f0
        sq = np.sqrt(np.where(disc >= 0.0, disc, 0.0))
        qq = -0.5 * (f1 + np.where(f1 >= 0.0, sq, -sq))
        r1 = qq / f2
        r2 = f0 / qq
    lo, hi = t_in - 1e-12, t_out + 1e-12
    okl = lin & (f1 != 0.0) & (tl >= lo) & (tl <= hi)
    out = np.where(okl, tl, out)
    quad = ~lin & (disc >= 0.0)
    for r in (r1, r2):
        ok = quad & np.isfinite(r) & (r >= lo) & (r <= hi) & (r < out)
        out = np.where(ok, r, out)
    return np.maximum(out, t_in)


def _ray_heightfield(o, d, t, pid, hf, x0, y0, L):
    gy, gx = hf.shape
    n = len(d)
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    ci = np.floor((o[0] - x0) / L).astype(np.int64) * np.ones(n, dtype=np.int64)
    cj = np.floor((o[1] - y0) / L).astype(np.int64) * np.ones(n, dtype=np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = np.where(dx > 0, 1, -1)
        sy = np.where(dy > 0, 1, -1)
        tnx = np.where(dx != 0.0, ((ci + (dx > 0)) * L + x0 - o[0]) / dx, np.inf)
        tny = np.where(dy != 0.0, ((cj + (dy > 0)) * L + y0 - o[1]) / dy, np.inf)
        tdx = np.where(dx != 0.0, L / np.abs(dx), np.inf)
        tdy = np.where(dy != 0.0, L / np.abs(dy), np.inf)
    t_in = np.zeros(n)
    active = (ci >= 0) & (ci <= gx - 2) & (cj >= 0) & (cj <= gy - 2)
    while active.any():
        idx = np.nonzero(active)[0]
        i, j = ci[idx], cj[idx]
        h00, h10 = hf[j, i], hf[j, i + 1]
        h01, h11 = hf[j + 1, i], hf[j + 1, i + 1]
        a, b, c, e = h00, h10 - h00, h01 - h00, h11 - h10 - h01 + h00
        u0 = (o[0] - (x0 + i * L)) / L
        v0 = (o[1] - (y0 + j * L)) / L
        du, dv = dx[idx] / L, dy[idx] / L
        f0 = o[2] - a - b * u0 - c * v0 - e * u0 * v0
        f1 = dz[idx] - b * du - c * dv - e * (u0 * dv + v0 * du)
        f2 = -e * du * dv
        t_out = np.minimum(np.minimum(tnx[idx], tny[idx]), t[idx])
        root = _cell_root(f0, f1, f2, t_in[idx], t_out)
        hit = root < t[idx]
        t[idx[hit]] = root[hit]
        pid[idx[hit]] = 0
        active[idx[hit]] = False
        rest = idx[~hit]
        stepx = tnx[rest] < tny[rest]
        rx, ry = rest[stepx], rest[~stepx]
        t_in[rx] = tnx[rx]
        ci[rx] += sx[rx]
        tnx[rx] += tdx[rx]
        t_in[ry] = tny[ry]
        cj[ry] += sy[ry]
        tny[ry] += tdy[ry]
        active[rest] = (ci[rest] >= 0) & (ci[rest] <= gx - 2) & (cj[rest] >= 0) & (cj[rest] <= gy - 2) & (t_in[rest] < t[rest])


def cast_rays(origin, dirs, t_max, boxes, cyls, spheres, planes, prism_index, prism_z, hf, hf_x0, hf_y0, hf_res):
    """Nearest hit parameter and primitive id per ray.

    ids: 0 ground, then boxes, cylinders, spheres, prisms consecutively from
    1; -1 for no hit (``t`` is ``inf``). ``hf`` of shape (0, 0) means the flat
    plane z = 0.
    """
    o = np.asarray(origin, dtype=float)
    d = np.asarray(dirs, dtype=float)
    n = len(d)
    t = np.full(n, float(t_max))
    pid = np.full(n, -1, dtype=np.int32)
    if hf.size == 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            tg = -o[2] / d[:, 2]
        hit = (d[:, 2] < 0.0) & (tg > _T_EPS) & (tg < t)
        t[hit] = tg[hit]
        pid[hit] = 0
    else:
        _ray_heightfield(o, d, t, pid, np.asarray(hf, dtype=float), hf_x0, hf_y0, hf_res)
    base = 1
    _ray_boxes(o, d, t, pid, boxes, base)
    base += len(boxes)
    _ray_cylinders(o, d, t, pid, cyls, base)
    base += len(cyls)
    _ray_spheres(o, d, t, pid, spheres, base)
    base += len(spheres)
    _ray_prisms(o, d, t, pid, planes, prism_index, prism_z, base)
    t[pid < 0] = np.inf
    return t, pid


# ---------------------------------------------------------------- band -----


def _wrap(a):
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def _field(dist, x0, y0, res, x, y):
    h, w = dist.shape
    fx = min(max((x - x0) / res, 0.0), w - 1.0)
    fy = min(max((y - y0) / res, 0.0), h - 1.0)
    i = min(int(fx), w - 2)
    j = min(int(fy), h - 2)
    ax, ay = fx - i, fy - j
    return ((dist[j, i] * (1.0 - ax) + dist[j, i + 1] * ax) * (1.0 - ay)
            + (dist[j + 1, i] * (1.0 - ax) + dist[j + 1, i + 1] * ax) * ay)


def _path_dist2(path, x, y):
    best = math.inf
    for k in range(len(path) - 1):
        ax, ay = path[k, 0], path[k, 1]
        bx, by = path[k + 1, 0], path[k + 1, 1]
        ex, ey = bx - ax, by - ay
        ll = ex * ex + ey * ey
        s = 0.0
        if ll > 0.0:
            s = ((x - ax) * ex + (y - ay) * ey) / ll
            s = min(max(s, 0.0), 1.0)
        qx, qy = ax + s * ex - x, ay + s * ey - y
        dd = qx * qx + qy * qy
        if dd < best:
            best = dd
    if len(path) == 1:
        best = (path[0, 0] - x) ** 2 + (path[0, 1] - y) ** 2
    return best


def _pose_term(p, prm):
    dist, x0, y0, res, path, w = prm["dist"], prm["x0"], prm["y0"], prm["res"], prm["path"], prm["w"]
    cl = prm["clearance"]
    dd = _field(dist, x0, y0, res, p[0], p[1])
    hinge = cl - dd
    cost = 0.0
    if hinge > 0.0:
        cost += w[1] * hinge * hinge
    cost += w[2] * _path_dist2(path, p[0], p[1])
    return cost


def _seg_term(p, q, dt, prm):
    w = prm["w"]
    dx, dy = q[0] - p[0], q[1] - p[1]
    cp, sp = math.cos(p[2]), math.sin(p[2])
    cq, sq = math.cos(q[2]), math.sin(q[2])
    kin = (cp + cq) * dy - (sp + sq) * dx
    proj = dx * cp + dy * sp
    cost = w[0] * dt + w[3] * kin * kin
    if proj < 0.0:
        cost += w[3] * proj * proj
    dist = math.sqrt(dx * dx + dy * dy)
    v = dist / dt
    om = abs(_wrap(q[2] - p[2])) / dt
    hv = v - prm["v_max"]
    ho = om - prm["omega_max"]
    if hv > 0.0:
        cost += w[4] * hv * hv
    if ho > 0.0:
        cost += w[4] * ho * ho
    return cost


def _band_cost(poses, dts, prm):
    n = len(poses)
    total = 0.0
    for k in range(n - 1):
        total += _seg_term(poses[k], poses[k + 1], dts[k], prm)
    for k in range(1, n):
        total += _pose_term(poses[k], prm)
    return total


def _params(dist, x0, y0, res, path, weights, clearance, v_max, omega_max):
    return dict(dist=np.asarray(dist, dtype=float), x0=x0, y0=y0, res=res,
                path=np.asarray(path, dtype=float).reshape(-1, 2), w=tuple(float(v) for v in weights),
                clearance=clearance, v_max=v_max, omega_max=omega_max)


def band_cost(poses, dts, dist, x0, y0, res, path, weights, clearance, v_max, omega_max):
    prm = _params(dist, x0, y0, res, path, weights, clearance, v_max, omega_max)
    return _band_cost(np.asarray(poses, dtype=float), np.asarray(dts, dtype=float), prm)


def band_descent(poses, dts, dist, x0, y0, res, path, weights, clearance, v_max, omega_max,
                 iterations, step_size, fd_h=1e-6, dt_min=0.01):
    """Damped gradient descent with backtracking on the elastic band.

    Returns ``(poses, dts, cost, iterations_done)``. Endpoints are fixed.
    """
    poses = np.array(poses, dtype=float, copy=True)
    dts = np.array(dts, dtype=float, copy=True)
    prm = _params(dist, x0, y0, res, path, weights, clearance, v_max, omega_max)
    n = len(poses)
    cost = _band_cost(poses, dts, prm)
    alpha = step_size
    done = 0
    for _ in range(iterations):
        gp = np.zeros_like(poses)
        gd = np.zeros_like(dts)
        for k in range(1, n - 1):
            for c in range(3):
                orig = poses[k, c]
                vals = []
                for sgn in (1.0, -1.0):
                    poses[k, c] = orig + sgn * fd_h
                    vals.append(_pose_term(poses[k], prm)
                                + _seg_term(poses[k - 1], poses[k], dts[k - 1], prm)
                                + _seg_term(poses[k], poses[k + 1], dts[k], prm))
                poses[k, c] = orig
                gp[k, c] = (vals[0] - vals[1]) / (2.0 * fd_h)
        for k in range(n - 1):
            orig = dts[k]
            hi = _seg_term(poses[k], poses[k + 1], orig + fd_h, prm)
            lo = _seg_term(poses[k], poses[k + 1], orig - fd_h, prm)
            gd[k] = (hi - lo) / (2.0 * fd_h)
        gmax = max(float(np.max(np.abs(gp))), float(np.max(np.abs(gd))))
        if gmax == 0.0:
            break
        accepted = False
        for _ in range(21):
            tp = poses - (alpha / gmax) * gp
            td = np.maximum(dts - (alpha / gmax) * gd, dt_min)
            tc = _band_cost(tp, td, prm)
            if tc < cost:
                poses, dts, cost = tp, td, tc
                accepted = True
                break
            alpha *= 0.5
        done += 1
        if not accepted:
            break
        alpha = min(2.0 * alpha, step_size)
    return poses, dts, cost, done
