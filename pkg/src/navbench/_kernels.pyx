# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same signatures and semantics as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, fabs, fmod, cos, sin, INFINITY, M_PI
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

# ------------------------------------------------------------------ cloth ---

cdef inline void _pair(double* z, const unsigned char* pin, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef double za = z[a]
    cdef double zb = z[b]
    cdef double d = zb - za
    if not pin[a]:
        z[a] = za + 0.5 * d
    if not pin[b]:
        z[b] = zb - 0.5 * d


cdef void _spring_pass(double* z, const unsigned char* pin, Py_ssize_t ny, Py_ssize_t nx) noexcept nogil:
    # four disjoint batches: even/odd horizontal pairs, then even/odd vertical pairs
    cdef Py_ssize_t i, j, row
    for i in range(ny):
        row = i * nx
        j = 0
        while j < nx - 1:
            _pair(z, pin, row + j, row + j + 1)
            j += 2
    for i in range(ny):
        row = i * nx
        j = 1
        while j < nx - 1:
            _pair(z, pin, row + j, row + j + 1)
            j += 2
    i = 0
    while i < ny - 1:
        row = i * nx
        for j in range(nx):
            _pair(z, pin, row + j, row + nx + j)
        i += 2
    i = 1
    while i < ny - 1:
        row = i * nx
        for j in range(nx):
            _pair(z, pin, row + j, row + nx + j)
        i += 2


cdef void _collide(double* z, const double* c, const unsigned char* has_c, unsigned char* pin,
                   Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        if has_c[i] and not pin[i] and z[i] < c[i]:
            z[i] = c[i]
            pin[i] = 1


def cloth_relax(z0, constraint, has_c, double drop, int rigidness, int max_iter, double eps):
    cdef cnp.ndarray[double, ndim=2] za = np.array(z0, dtype=np.float64, order="C", copy=True)
    cdef cnp.ndarray[double, ndim=2] ca = np.ascontiguousarray(constraint, dtype=np.float64)
    cdef cnp.ndarray[unsigned char, ndim=2] ha = np.ascontiguousarray(has_c, dtype=np.uint8)
    cdef cnp.ndarray[unsigned char, ndim=2] pin_a = np.zeros((za.shape[0], za.shape[1]), dtype=np.uint8)
    cdef cnp.ndarray[double, ndim=2] prev_a = np.empty_like(za)
    cdef double* z = <double*> za.data
    cdef const double* c = <const double*> ca.data
    cdef const unsigned char* hc = <const unsigned char*> ha.data
    cdef unsigned char* pin = <unsigned char*> pin_a.data
    cdef double* prev = <double*> prev_a.data
    cdef Py_ssize_t ny = za.shape[0], nx = za.shape[1], n = ny * nx, i
    cdef int it = 0, r
    cdef double disp, dd
    with nogil:
        while it < max_iter:
            it += 1
            for i in range(n):
                prev[i] = z[i]
                if not pin[i]:
                    z[i] -= drop
            _collide(z, c, hc, pin, n)
            for r in range(rigidness):
                _spring_pass(z, pin, ny, nx)
            _collide(z, c, hc, pin, n)
            disp = 0.0
            for i in range(n):
                dd = fabs(z[i] - prev[i])
                if dd > disp:
                    disp = dd
            if disp < eps:
                break
    return za, pin_a, it


# ------------------------------------------------------------------ A* ------

cdef struct HeapItem:
    double f
    long long order
    Py_ssize_t node


cdef inline bint _less(HeapItem a, HeapItem b) nogil:
    return a.f < b.f or (a.f == b.f and a.order < b.order)


cdef struct Heap:
    HeapItem* data
    Py_ssize_t size
    Py_ssize_t cap


cdef int _push(Heap* h, HeapItem it) nogil:
    cdef Py_ssize_t i, p
    cdef HeapItem* nd
    if h.size == h.cap:
        h.cap = h.cap * 2 + 16
        nd = <HeapItem*> realloc(h.data, h.cap * sizeof(HeapItem))
        if nd == NULL:
            return -1
        h.data = nd
    i = h.size
    h.size += 1
    while i > 0:
        p = (i - 1) // 2
        if _less(it, h.data[p]):
            h.data[i] = h.data[p]
            i = p
        else:
            break
    h.data[i] = it
    return 0


cdef HeapItem _pop(Heap* h) nogil:
    cdef HeapItem top = h.data[0]
    cdef HeapItem last
    cdef Py_ssize_t i = 0, ch
    h.size -= 1
    if h.size > 0:
        last = h.data[h.size]
        while True:
            ch = 2 * i + 1
            if ch >= h.size:
                break
            if ch + 1 < h.size and _less(h.data[ch + 1], h.data[ch]):
                ch += 1
            if _less(h.data[ch], last):
                h.data[i] = h.data[ch]
                i = ch
            else:
                break
        h.data[i] = last
    return top


def astar_grid(blocked, Py_ssize_t sr, Py_ssize_t sc, Py_ssize_t gr, Py_ssize_t gc):
    cdef const unsigned char[:, ::1] bl = np.ascontiguousarray(blocked, dtype=np.uint8)
    cdef Py_ssize_t h = bl.shape[0], w = bl.shape[1]
    if bl[sr, sc] or bl[gr, gc]:
        return None
    cdef double[::1] g = np.full(h * w, np.inf)
    cdef long long[::1] parent = np.full(h * w, -1, dtype=np.int64)
    cdef unsigned char[::1] closed = np.zeros(h * w, dtype=np.uint8)
    cdef Py_ssize_t start = sr * w + sc, goal = gr * w + gc
    cdef Py_ssize_t cur, r, c, nr, nc, nxt, k
    cdef int dr, dc
    cdef int[8] DR = [-1, -1, -1, 0, 0, 1, 1, 1]
    cdef int[8] DC = [-1, 0, 1, -1, 1, -1, 0, 1]
    cdef double SQ2 = sqrt(2.0), step, ng, gcur, hr, hc
    cdef long long counter = 1
    cdef Heap heap
    cdef HeapItem it
    cdef bint found = False
    heap.data = NULL
    heap.size = 0
    heap.cap = 0
    g[start] = 0.0
    it.f = sqrt(<double>((sr - gr) * (sr - gr) + (sc - gc) * (sc - gc)))
    it.order = 0
    it.node = start
    try:
        with nogil:
            _push(&heap, it)
            while heap.size > 0:
                it = _pop(&heap)
                cur = it.node
                if closed[cur]:
                    continue
                closed[cur] = 1
                if cur == goal:
                    found = True
                    break
                r = cur // w
                c = cur - r * w
                gcur = g[cur]
                for k in range(8):
                    dr = DR[k]
                    dc = DC[k]
                    nr = r + dr
                    nc = c + dc
                    if nr < 0 or nr >= h or nc < 0 or nc >= w or bl[nr, nc]:
                        continue
                    if dr != 0 and dc != 0:
                        if bl[r + dr, c] or bl[r, c + dc]:
                            continue
                        step = SQ2
                    else:
                        step = 1.0
                    nxt = nr * w + nc
                    if closed[nxt]:
                        continue
                    ng = gcur + step
                    if ng < g[nxt]:
                        g[nxt] = ng
                        parent[nxt] = cur
                        hr = <double>(nr - gr)
                        hc = <double>(nc - gc)
                        it.f = ng + sqrt(hr * hr + hc * hc)
                        it.order = counter
                        it.node = nxt
                        counter += 1
                        if _push(&heap, it) != 0:
                            break
    finally:
        free(heap.data)
    if not found:
        return None
    cdef Py_ssize_t node = goal
    out = [goal]
    while node != start:
        node = parent[node]
        out.append(node)
    out.reverse()
    return np.array([divmod(i, w) for i in out], dtype=np.int64)


# ------------------------------------------------------------------ rays ----

cdef double T_EPS = 1e-9


cdef inline double _slab(double o, double d, double lo, double hi, double* tn, double* tf) nogil:
    # returns 0 on miss
    cdef double ta, tb, t1, t2
    if d == 0.0:
        if o < lo or o > hi:
            return 0.0
        return 1.0
    ta = (lo - o) / d
    tb = (hi - o) / d
    t1 = ta if ta < tb else tb
    t2 = ta if ta > tb else tb
    if t1 > tn[0]:
        tn[0] = t1
    if t2 < tf[0]:
        tf[0] = t2
    return 1.0


cdef inline double _entry(double tn, double tf) nogil:
    if tn > tf:
        return INFINITY
    if tn > T_EPS:
        return tn
    if tf > T_EPS:
        return 0.0
    return INFINITY


cdef inline double _root_in(double f0, double f1, double f2, double t_in, double t_out) nogil:
    cdef double lo = t_in - 1e-12, hi = t_out + 1e-12, best = INFINITY
    cdef double tl, disc, sq, qq, r1, r2
    if fabs(f2) < 1e-14:
        if f1 != 0.0:
            tl = -f0 / f1
            if tl >= lo and tl <= hi:
                best = tl
    else:
        disc = f1 * f1 - 4.0 * f2 * f0
        if disc >= 0.0:
            sq = sqrt(disc)
            qq = -0.5 * (f1 + (sq if f1 >= 0.0 else -sq))
            r1 = qq / f2
            if r1 == r1 and r1 != INFINITY and r1 != -INFINITY and r1 >= lo and r1 <= hi and r1 < best:
                best = r1
            if qq != 0.0:
                r2 = f0 / qq
                if r2 == r2 and r2 != INFINITY and r2 != -INFINITY and r2 >= lo and r2 <= hi and r2 < best:
                    best = r2
    if best < t_in:
        best = t_in
    return best


cdef double _heightfield(double ox, double oy, double oz, double dx, double dy, double dz, double tmax,
                         const double[:, ::1] hf, double x0, double y0, double L) nogil:
    cdef Py_ssize_t gy = hf.shape[0], gx = hf.shape[1]
    cdef long ci = <long> floor((ox - x0) / L), cj = <long> floor((oy - y0) / L)
    cdef long sx = 1 if dx > 0 else -1, sy = 1 if dy > 0 else -1
    cdef double tnx = INFINITY, tny = INFINITY, tdx = INFINITY, tdy = INFINITY
    cdef double t_in = 0.0, t_out, h00, h10, h01, h11, a, b, c, e, u0, v0, du, dv, f0, f1, f2, root
    if dx != 0.0:
        tnx = ((ci + (1 if dx > 0 else 0)) * L + x0 - ox) / dx
        tdx = L / fabs(dx)
    if dy != 0.0:
        tny = ((cj + (1 if dy > 0 else 0)) * L + y0 - oy) / dy
        tdy = L / fabs(dy)
    while ci >= 0 and ci <= gx - 2 and cj >= 0 and cj <= gy - 2 and t_in < tmax:
        h00 = hf[cj, ci]
        h10 = hf[cj, ci + 1]
        h01 = hf[cj + 1, ci]
        h11 = hf[cj + 1, ci + 1]
        a = h00
        b = h10 - h00
        c = h01 - h00
        e = h11 - h10 - h01 + h00
        u0 = (ox - (x0 + ci * L)) / L
        v0 = (oy - (y0 + cj * L)) / L
        du = dx / L
        dv = dy / L
        f0 = oz - a - b * u0 - c * v0 - e * u0 * v0
        f1 = dz - b * du - c * dv - e * (u0 * dv + v0 * du)
        f2 = -e * du * dv
        t_out = tnx if tnx < tny else tny
        if tmax < t_out:
            t_out = tmax
        root = _root_in(f0, f1, f2, t_in, t_out)
        if root < tmax:
            return root
        if tnx < tny:
            t_in = tnx
            ci += sx
            tnx += tdx
        else:
            t_in = tny
            cj += sy
            tny += tdy
    return INFINITY


def cast_rays(origin, dirs, double t_max, boxes, cyls, spheres, planes, prism_index, prism_z,
              hf, double hf_x0, double hf_y0, double hf_res):
    cdef const double[::1] o = np.ascontiguousarray(origin, dtype=np.float64)
    cdef const double[:, ::1] d = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    cdef const double[:, ::1] bx = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 6)
    cdef const double[:, ::1] cy = np.ascontiguousarray(cyls, dtype=np.float64).reshape(-1, 5)
    cdef const double[:, ::1] sp = np.ascontiguousarray(spheres, dtype=np.float64).reshape(-1, 4)
    cdef const double[:, ::1] pl = np.ascontiguousarray(planes, dtype=np.float64).reshape(-1, 3)
    cdef const long long[:, ::1] pidx = np.ascontiguousarray(prism_index, dtype=np.int64).reshape(-1, 2)
    cdef const double[:, ::1] pz = np.ascontiguousarray(prism_z, dtype=np.float64).reshape(-1, 2)
    hf_arr = np.ascontiguousarray(hf, dtype=np.float64)
    cdef bint flat = hf_arr.size == 0
    if flat:
        hf_arr = np.zeros((1, 1))
    cdef const double[:, ::1] hfv = hf_arr
    cdef Py_ssize_t n = d.shape[0], i, k, m
    t_a = np.empty(n)
    id_a = np.empty(n, dtype=np.int32)
    cdef double[::1] tout = t_a
    cdef int[::1] idout = id_a
    cdef double ox = o[0], oy = o[1], oz = o[2]
    cdef double dx, dy, dz, best, tt, tn, tf, px, py, qa, qb, qc, disc, sq, zz, xx, yy, r, num, den
    cdef int bid, base
    with nogil:
        for i in range(n):
            dx = d[i, 0]
            dy = d[i, 1]
            dz = d[i, 2]
            best = t_max
            bid = -1
            if flat:
                if dz < 0.0:
                    tt = -oz / dz
                    if tt > T_EPS and tt < best:
                        best = tt
                        bid = 0
            else:
                tt = _heightfield(ox, oy, oz, dx, dy, dz, best, hfv, hf_x0, hf_y0, hf_res)
                if tt < best:
                    best = tt
                    bid = 0
            base = 1
            for k in range(bx.shape[0]):
                tn = -INFINITY
                tf = INFINITY
                if _slab(ox, dx, bx[k, 0], bx[k, 1], &tn, &tf) == 0.0:
                    continue
                if _slab(oy, dy, bx[k, 2], bx[k, 3], &tn, &tf) == 0.0:
                    continue
                if _slab(oz, dz, bx[k, 4], bx[k, 5], &tn, &tf) == 0.0:
                    continue
                tt = _entry(tn, tf)
                if tt < best:
                    best = tt
                    bid = base + k
            base += bx.shape[0]
            for k in range(cy.shape[0]):
                px = ox - cy[k, 0]
                py = oy - cy[k, 1]
                r = cy[k, 2]
                qa = dx * dx + dy * dy
                qb = 2.0 * (px * dx + py * dy)
                qc = px * px + py * py - r * r
                disc = qb * qb - 4.0 * qa * qc
                if qa > 0.0 and disc >= 0.0:
                    sq = sqrt(disc)
                    tt = (-qb - sq) / (2.0 * qa)
                    zz = oz + tt * dz
                    if tt > T_EPS and zz >= cy[k, 3] and zz <= cy[k, 4] and tt < best:
                        best = tt
                        bid = base + k
                    tt = (-qb + sq) / (2.0 * qa)
                    zz = oz + tt * dz
                    if tt > T_EPS and zz >= cy[k, 3] and zz <= cy[k, 4] and tt < best:
                        best = tt
                        bid = base + k
                if dz != 0.0:
                    for m in range(2):
                        tt = (cy[k, 3 + m] - oz) / dz
                        xx = px + tt * dx
                        yy = py + tt * dy
                        if tt > T_EPS and xx * xx + yy * yy <= r * r and tt < best:
                            best = tt
                            bid = base + k
            base += cy.shape[0]
            for k in range(sp.shape[0]):
                px = ox - sp[k, 0]
                py = oy - sp[k, 1]
                zz = oz - sp[k, 2]
                r = sp[k, 3]
                qa = dx * dx + dy * dy + dz * dz
                qb = 2.0 * (dx * px + dy * py + dz * zz)
                qc = (px * px + py * py + zz * zz) - r * r
                disc = qb * qb - 4.0 * qa * qc
                if disc >= 0.0:
                    sq = sqrt(disc)
                    tt = (-qb - sq) / (2.0 * qa)
                    if not tt > T_EPS:
                        tt = (-qb + sq) / (2.0 * qa)
                        tt = 0.0 if tt > T_EPS else INFINITY
                    if tt < best:
                        best = tt
                        bid = base + k
            base += sp.shape[0]
            for k in range(pidx.shape[0]):
                tn = -INFINITY
                tf = INFINITY
                for m in range(pidx[k, 0], pidx[k, 0] + pidx[k, 1]):
                    den = pl[m, 0] * dx + pl[m, 1] * dy
                    num = pl[m, 2] - (pl[m, 0] * ox + pl[m, 1] * oy)
                    if den == 0.0:
                        if num < 0.0:
                            tn = INFINITY
                            break
                    else:
                        tt = num / den
                        if den > 0.0:
                            if tt < tf:
                                tf = tt
                        elif tt > tn:
                            tn = tt
                if tn == INFINITY:
                    continue
                if _slab(oz, dz, pz[k, 0], pz[k, 1], &tn, &tf) == 0.0:
                    continue
                tt = _entry(tn, tf)
                if tt < best:
                    best = tt
                    bid = base + k
            if bid < 0:
                best = INFINITY
            tout[i] = best
            idout[i] = bid
    return t_a, id_a


# ------------------------------------------------------------------ band ----

cdef struct BandParams:
    const double* dist
    Py_ssize_t dh, dw
    double x0, y0, res
    const double* path
    Py_ssize_t npath
    double w0, w1, w2, w3, w4
    double clearance, v_max, omega_max


cdef inline double _wrap(double a) nogil:
    a = fmod(a + M_PI, 2.0 * M_PI)
    if a <= 0.0:
        a += 2.0 * M_PI
    return a - M_PI


cdef inline double _field(BandParams* p, double x, double y) nogil:
    cdef double fx = (x - p.x0) / p.res, fy = (y - p.y0) / p.res, ax, ay
    cdef Py_ssize_t i, j, w = p.dw
    if fx < 0.0:
        fx = 0.0
    if fx > p.dw - 1.0:
        fx = p.dw - 1.0
    if fy < 0.0:
        fy = 0.0
    if fy > p.dh - 1.0:
        fy = p.dh - 1.0
    i = <Py_ssize_t> fx
    j = <Py_ssize_t> fy
    if i > p.dw - 2:
        i = p.dw - 2
    if j > p.dh - 2:
        j = p.dh - 2
    ax = fx - i
    ay = fy - j
    return ((p.dist[j * w + i] * (1.0 - ax) + p.dist[j * w + i + 1] * ax) * (1.0 - ay)
            + (p.dist[(j + 1) * w + i] * (1.0 - ax) + p.dist[(j + 1) * w + i + 1] * ax) * ay)


cdef inline double _path_dist2(BandParams* p, double x, double y) nogil:
    cdef double best = INFINITY, ax, ay, bx, by, ex, ey, ll, s, qx, qy, dd
    cdef Py_ssize_t k
    if p.npath == 1:
        return (p.path[0] - x) * (p.path[0] - x) + (p.path[1] - y) * (p.path[1] - y)
    for k in range(p.npath - 1):
        ax = p.path[2 * k]
        ay = p.path[2 * k + 1]
        bx = p.path[2 * k + 2]
        by = p.path[2 * k + 3]
        ex = bx - ax
        ey = by - ay
        ll = ex * ex + ey * ey
        s = 0.0
        if ll > 0.0:
            s = ((x - ax) * ex + (y - ay) * ey) / ll
            if s < 0.0:
                s = 0.0
            if s > 1.0:
                s = 1.0
        qx = ax + s * ex - x
        qy = ay + s * ey - y
        dd = qx * qx + qy * qy
        if dd < best:
            best = dd
    return best


cdef inline double _pose_term(BandParams* p, double* q) nogil:
    cdef double dd = _field(p, q[0], q[1])
    cdef double hinge = p.clearance - dd
    cdef double cost = 0.0
    if hinge > 0.0:
        cost += p.w1 * hinge * hinge
    cost += p.w2 * _path_dist2(p, q[0], q[1])
    return cost


cdef inline double _seg_term(BandParams* p, double* a, double* b, double dt) nogil:
    cdef double dx = b[0] - a[0], dy = b[1] - a[1]
    cdef double ca = cos(a[2]), sa = sin(a[2]), cb = cos(b[2]), sb = sin(b[2])
    cdef double kin = (ca + cb) * dy - (sa + sb) * dx
    cdef double proj = dx * ca + dy * sa
    cdef double cost = p.w0 * dt + p.w3 * kin * kin
    cdef double dist, v, om, hv, ho
    if proj < 0.0:
        cost += p.w3 * proj * proj
    dist = sqrt(dx * dx + dy * dy)
    v = dist / dt
    om = fabs(_wrap(b[2] - a[2])) / dt
    hv = v - p.v_max
    ho = om - p.omega_max
    if hv > 0.0:
        cost += p.w4 * hv * hv
    if ho > 0.0:
        cost += p.w4 * ho * ho
    return cost


cdef double _band_cost(BandParams* p, double* poses, double* dts, Py_ssize_t n) nogil:
    cdef double total = 0.0
    cdef Py_ssize_t k
    for k in range(n - 1):
        total += _seg_term(p, &poses[3 * k], &poses[3 * k + 3], dts[k])
    for k in range(1, n):
        total += _pose_term(p, &poses[3 * k])
    return total


def band_cost(poses, dts, dist, double x0, double y0, double res, path, weights,
              double clearance, double v_max, double omega_max):
    cdef const double[:, ::1] P = np.ascontiguousarray(poses, dtype=np.float64)
    cdef const double[::1] D = np.ascontiguousarray(dts, dtype=np.float64)
    cdef const double[:, ::1] F = np.ascontiguousarray(dist, dtype=np.float64)
    cdef const double[:, ::1] W = np.ascontiguousarray(path, dtype=np.float64).reshape(-1, 2)
    cdef BandParams p
    _fill(&p, F, W, x0, y0, res, weights, clearance, v_max, omega_max)
    return _band_cost(&p, <double*> &P[0, 0], <double*> &D[0], P.shape[0])


cdef void _fill(BandParams* p, const double[:, ::1] F, const double[:, ::1] W, double x0, double y0,
                double res, weights, double clearance, double v_max, double omega_max):
    p.dist = &F[0, 0]
    p.dh = F.shape[0]
    p.dw = F.shape[1]
    p.x0 = x0
    p.y0 = y0
    p.res = res
    p.path = &W[0, 0]
    p.npath = W.shape[0]
    p.w0, p.w1, p.w2, p.w3, p.w4 = [float(v) for v in weights]
    p.clearance = clearance
    p.v_max = v_max
    p.omega_max = omega_max


def band_descent(poses, dts, dist, double x0, double y0, double res, path, weights, double clearance,
                 double v_max, double omega_max, int iterations, double step_size,
                 double fd_h=1e-6, double dt_min=0.01):
    pa = np.array(poses, dtype=np.float64, order="C", copy=True)
    da = np.array(dts, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] P = pa
    cdef double[::1] D = da
    cdef const double[:, ::1] F = np.ascontiguousarray(dist, dtype=np.float64)
    cdef const double[:, ::1] W = np.ascontiguousarray(path, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = P.shape[0], k, c, nv = 3 * n
    cdef double[:, ::1] GP = np.zeros((n, 3))
    cdef double[::1] GD = np.zeros(max(n - 1, 1))
    cdef double[:, ::1] TP = np.empty((n, 3))
    cdef double[::1] TD = np.empty(max(n - 1, 1))
    cdef BandParams p
    _fill(&p, F, W, x0, y0, res, weights, clearance, v_max, omega_max)
    cdef double* pp = &P[0, 0]
    cdef double* dd = &D[0]
    cdef double cost, tc, orig, hi, lo, gmax, alpha = step_size, sc
    cdef int it, done = 0, bt
    cdef bint accepted
    cost = _band_cost(&p, pp, dd, n)
    with nogil:
        for it in range(iterations):
            for k in range(1, n - 1):
                for c in range(3):
                    orig = pp[3 * k + c]
                    pp[3 * k + c] = orig + fd_h
                    hi = (_pose_term(&p, &pp[3 * k]) + _seg_term(&p, &pp[3 * k - 3], &pp[3 * k], dd[k - 1])
                          + _seg_term(&p, &pp[3 * k], &pp[3 * k + 3], dd[k]))
                    pp[3 * k + c] = orig - fd_h
                    lo = (_pose_term(&p, &pp[3 * k]) + _seg_term(&p, &pp[3 * k - 3], &pp[3 * k], dd[k - 1])
                          + _seg_term(&p, &pp[3 * k], &pp[3 * k + 3], dd[k]))
                    pp[3 * k + c] = orig
                    GP[k, c] = (hi - lo) / (2.0 * fd_h)
            for k in range(n - 1):
                orig = dd[k]
                hi = _seg_term(&p, &pp[3 * k], &pp[3 * k + 3], orig + fd_h)
                lo = _seg_term(&p, &pp[3 * k], &pp[3 * k + 3], orig - fd_h)
                GD[k] = (hi - lo) / (2.0 * fd_h)
            gmax = 0.0
            for k in range(n):
                for c in range(3):
                    if fabs(GP[k, c]) > gmax:
                        gmax = fabs(GP[k, c])
            for k in range(n - 1):
                if fabs(GD[k]) > gmax:
                    gmax = fabs(GD[k])
            if gmax == 0.0:
                break
            accepted = False
            for bt in range(21):
                sc = alpha / gmax
                for k in range(n):
                    for c in range(3):
                        TP[k, c] = pp[3 * k + c] - sc * GP[k, c]
                for k in range(n - 1):
                    TD[k] = dd[k] - sc * GD[k]
                    if TD[k] < dt_min:
                        TD[k] = dt_min
                tc = _band_cost(&p, &TP[0, 0], &TD[0], n)
                if tc < cost:
                    for k in range(n):
                        for c in range(3):
                            pp[3 * k + c] = TP[k, c]
                    for k in range(n - 1):
                        dd[k] = TD[k]
                    cost = tc
                    accepted = True
                    break
                alpha *= 0.5
            done += 1
            if not accepted:
                break
            alpha = 2.0 * alpha
            if alpha > step_size:
                alpha = step_size
    return pa, da, cost, done
