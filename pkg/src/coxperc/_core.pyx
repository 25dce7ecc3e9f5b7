# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled connectivity kernels.

All kernels share the same counting-sort cell grid: cells have side at least
``r`` so a fixed-radius query only inspects the 3**d surrounding cells.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, INFINITY

cnp.import_array()

ctypedef cnp.int64_t i64


cdef struct Grid:
    int dim
    double cell
    double lo[3]
    i64 shape[3]
    i64 stride[3]


cdef i64 _max_cells(i64 n):
    return 8 * n + 4096


cdef Grid _make_grid(const double[:, ::1] pts, double r):
    cdef Grid g
    cdef i64 n = pts.shape[0]
    cdef int d = pts.shape[1]
    cdef int k
    cdef i64 i, total
    cdef double hi[3]
    g.dim = d
    g.cell = r
    for k in range(3):
        g.lo[k] = 0.0
        hi[k] = 0.0
        g.shape[k] = 1
    if n > 0:
        for k in range(d):
            g.lo[k] = pts[0, k]
            hi[k] = pts[0, k]
        for i in range(1, n):
            for k in range(d):
                if pts[i, k] < g.lo[k]:
                    g.lo[k] = pts[i, k]
                if pts[i, k] > hi[k]:
                    hi[k] = pts[i, k]
    while True:
        total = 1
        for k in range(d):
            g.shape[k] = <i64>floor((hi[k] - g.lo[k]) / g.cell) + 1
            total *= g.shape[k]
        if total <= _max_cells(n):
            break
        g.cell *= 1.5
    g.stride[d - 1] = 1
    for k in range(d - 2, -1, -1):
        g.stride[k] = g.stride[k + 1] * g.shape[k + 1]
    return g


cdef inline i64 _coord(Grid* g, double x, int k):
    cdef i64 c = <i64>floor((x - g.lo[k]) / g.cell)
    if c < 0:
        c = 0
    elif c >= g.shape[k]:
        c = g.shape[k] - 1
    return c


cdef void _bucket(Grid* g, const double[:, ::1] pts, i64[::1] coords,
                  i64[::1] start, i64[::1] order):
    """Counting sort of points by cell; stable, so insertion order survives."""
    cdef i64 n = pts.shape[0]
    cdef i64 i, c, ncell = start.shape[0] - 1
    cdef int k
    for c in range(ncell + 1):
        start[c] = 0
    for i in range(n):
        c = 0
        for k in range(g.dim):
            c += _coord(g, pts[i, k], k) * g.stride[k]
        coords[i] = c
        start[c + 1] += 1
    for c in range(ncell):
        start[c + 1] += start[c]
    cdef i64[::1] fill = np.zeros(ncell, dtype=np.int64)
    for i in range(n):
        c = coords[i]
        order[start[c] + fill[c]] = i
        fill[c] += 1


cdef inline double _dist2(const double[:, ::1] pts, i64 i, i64 j, int d):
    cdef double s = 0.0, t
    cdef int k
    for k in range(d):
        t = pts[i, k] - pts[j, k]
        s += t * t
    return s


cdef inline i64 _find(i64[::1] parent, i64 i):
    # path halving
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


cdef inline bint _union(i64[::1] parent, i64[::1] rank, i64 a, i64 b):
    a = _find(parent, a)
    b = _find(parent, b)
    if a == b:
        return False
    if rank[a] < rank[b]:
        a, b = b, a
    parent[b] = a
    if rank[a] == rank[b]:
        rank[a] += 1
    return True


cdef inline double _supnorm(const double[:, ::1] pts, i64 i, int d):
    cdef double m = 0.0, t
    cdef int k
    for k in range(d):
        t = fabs(pts[i, k])
        if t > m:
            m = t
    return m


cdef class _Neighbors:
    """Iterates grid neighbours of a point; holds the bucketed grid."""
    cdef Grid g
    cdef i64[::1] coords
    cdef i64[::1] start
    cdef i64[::1] order

    def __init__(self, const double[:, ::1] pts, double r):
        cdef i64 ncell = 1
        cdef int k
        self.g = _make_grid(pts, r)
        for k in range(self.g.dim):
            ncell *= self.g.shape[k]
        self.coords = np.empty(pts.shape[0], dtype=np.int64)
        self.start = np.empty(ncell + 1, dtype=np.int64)
        self.order = np.empty(pts.shape[0], dtype=np.int64)
        _bucket(&self.g, pts, self.coords, self.start, self.order)


def gilbert_labels(const double[:, ::1] pts, double r):
    """Union-find labels of the r-components (edges for |x - y| < r).

    Returns ``(labels, n_unions)``; labels are consecutive by first appearance.
    """
    cdef i64 n = pts.shape[0]
    cdef int d = pts.shape[1]
    cdef double r2 = r * r
    cdef i64[::1] parent = np.arange(n, dtype=np.int64)
    cdef i64[::1] rank = np.zeros(n, dtype=np.int64)
    cdef i64 unions = 0
    cdef i64 i, j, p, cz, cy, cx, c0, cell
    cdef i64 lo[3]
    cdef i64 hi[3]
    cdef i64 cc[3]
    cdef int k
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0
    cdef _Neighbors nb = _Neighbors(pts, r)
    cdef Grid* g = &nb.g
    for i in range(n):
        for k in range(3):
            cc[k] = 0
            lo[k] = 0
            hi[k] = 0
        for k in range(d):
            cc[k] = _coord(g, pts[i, k], k)
            lo[k] = cc[k] - 1 if cc[k] > 0 else 0
            hi[k] = cc[k] + 1 if cc[k] + 1 < g.shape[k] else cc[k]
        for cx in range(lo[0], hi[0] + 1):
            for cy in range(lo[1], hi[1] + 1):
                for cz in range(lo[2], hi[2] + 1):
                    cell = cx * g.stride[0]
                    if d > 1:
                        cell += cy * g.stride[1]
                    if d > 2:
                        cell += cz * g.stride[2]
                    for p in range(nb.start[cell], nb.start[cell + 1]):
                        j = nb.order[p]
                        if j <= i:
                            continue
                        if _dist2(pts, i, j, d) < r2:
                            if _union(parent, rank, i, j):
                                unions += 1
    labels = np.empty(n, dtype=np.int64)
    cdef i64[::1] lab = labels
    cdef i64[::1] remap = np.full(n, -1, dtype=np.int64)
    cdef i64 nxt = 0, root
    for i in range(n):
        root = _find(parent, i)
        if remap[root] < 0:
            remap[root] = nxt
            nxt += 1
        lab[i] = remap[root]
    return labels, unions


def origin_reach(const double[:, ::1] pts, double r, double half):
    """True iff the component of point 0 holds a point of sup-norm >= half."""
    cdef i64 n = pts.shape[0]
    cdef int d = pts.shape[1]
    cdef double r2 = r * r
    cdef i64 i, j, p, cx, cy, cz, cell, top
    cdef i64 lo[3]
    cdef i64 hi[3]
    cdef i64 cc[3]
    cdef int k
    if n == 0:
        return False
    if _supnorm(pts, 0, d) >= half:
        return True
    cdef _Neighbors nb = _Neighbors(pts, r)
    cdef Grid* g = &nb.g
    cdef cnp.uint8_t[::1] seen = np.zeros(n, dtype=np.uint8)
    cdef i64[::1] stack = np.empty(n, dtype=np.int64)
    stack[0] = 0
    seen[0] = 1
    top = 1
    while top > 0:
        top -= 1
        i = stack[top]
        for k in range(3):
            cc[k] = 0
            lo[k] = 0
            hi[k] = 0
        for k in range(d):
            cc[k] = _coord(g, pts[i, k], k)
            lo[k] = cc[k] - 1 if cc[k] > 0 else 0
            hi[k] = cc[k] + 1 if cc[k] + 1 < g.shape[k] else cc[k]
        for cx in range(lo[0], hi[0] + 1):
            for cy in range(lo[1], hi[1] + 1):
                for cz in range(lo[2], hi[2] + 1):
                    cell = cx * g.stride[0]
                    if d > 1:
                        cell += cy * g.stride[1]
                    if d > 2:
                        cell += cz * g.stride[2]
                    for p in range(nb.start[cell], nb.start[cell + 1]):
                        j = nb.order[p]
                        if seen[j]:
                            continue
                        if _dist2(pts, i, j, d) < r2:
                            if _supnorm(pts, j, d) >= half:
                                return True
                            seen[j] = 1
                            stack[top] = j
                            top += 1
    return False


def escape_threshold(const double[:, ::1] pts, const double[::1] marks,
                     const i64[::1] order, double r, double half):
    """Smallest mark at which point 0 escapes sup-norm ``half``.

    Points are switched on in ``order`` (ascending marks, point 0 first);
    components are merged incrementally and each root carries a flag telling
    whether the component touches the boundary.  Returns +inf if the origin
    never escapes, even with every point present.
    """
    cdef i64 n = pts.shape[0]
    cdef int d = pts.shape[1]
    cdef double r2 = r * r
    cdef i64 i, j, p, q, cx, cy, cz, cell, a, b
    cdef i64 lo[3]
    cdef i64 hi[3]
    cdef i64 cc[3]
    cdef int k
    if n == 0:
        return INFINITY
    cdef _Neighbors nb = _Neighbors(pts, r)
    cdef Grid* g = &nb.g
    cdef i64[::1] parent = np.arange(n, dtype=np.int64)
    cdef i64[::1] rank = np.zeros(n, dtype=np.int64)
    cdef cnp.uint8_t[::1] on = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] edge = np.zeros(n, dtype=np.uint8)
    for q in range(n):
        i = order[q]
        on[i] = 1
        if _supnorm(pts, i, d) >= half:
            edge[i] = 1
        for k in range(3):
            cc[k] = 0
            lo[k] = 0
            hi[k] = 0
        for k in range(d):
            cc[k] = _coord(g, pts[i, k], k)
            lo[k] = cc[k] - 1 if cc[k] > 0 else 0
            hi[k] = cc[k] + 1 if cc[k] + 1 < g.shape[k] else cc[k]
        for cx in range(lo[0], hi[0] + 1):
            for cy in range(lo[1], hi[1] + 1):
                for cz in range(lo[2], hi[2] + 1):
                    cell = cx * g.stride[0]
                    if d > 1:
                        cell += cy * g.stride[1]
                    if d > 2:
                        cell += cz * g.stride[2]
                    for p in range(nb.start[cell], nb.start[cell + 1]):
                        j = nb.order[p]
                        if j == i or not on[j]:
                            continue
                        if _dist2(pts, i, j, d) < r2:
                            a = _find(parent, i)
                            b = _find(parent, j)
                            if a != b:
                                _union(parent, rank, a, b)
                                if edge[a] or edge[b]:
                                    edge[_find(parent, a)] = 1
        if on[0] and edge[_find(parent, 0)]:
            return marks[i]
    return INFINITY


def edge_labels(i64 n, const i64[:, ::1] edges):
    """Union-find component labels of an explicit graph on ``n`` vertices."""
    cdef i64[::1] parent = np.arange(n, dtype=np.int64)
    cdef i64[::1] rank = np.zeros(n, dtype=np.int64)
    cdef i64 e, i, nxt = 0, root
    for e in range(edges.shape[0]):
        _union(parent, rank, edges[e, 0], edges[e, 1])
    labels = np.empty(n, dtype=np.int64)
    cdef i64[::1] lab = labels
    cdef i64[::1] remap = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        root = _find(parent, i)
        if remap[root] < 0:
            remap[root] = nxt
            nxt += 1
        lab[i] = remap[root]
    return labels
