"""Numpy fallback for the compiled kernels in ``_core.pyx``.

Same signatures and results; used when the extension is not built or when
``COXPERC_PURE=1`` is set.
"""

from __future__ import annotations

import numpy as np


def close_pairs(pts: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    """All index pairs ``i < j`` with ``|p_i - p_j| < r`` via a sorted cell grid."""
    n, d = pts.shape
    if n < 2:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    lo = pts.min(axis=0)
    cells = np.floor((pts - lo) / r).astype(np.int64)
    shape = cells.max(axis=0) + 3
    # pad by one cell on each side so neighbour keys never wrap
    cells += 1
    stride = np.ones(d, dtype=np.int64)
    for k in range(d - 2, -1, -1):
        stride[k] = stride[k + 1] * shape[k + 1]
    keys = cells @ stride
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]

    offsets = np.stack(np.meshgrid(*([np.array([-1, 0, 1])] * d), indexing="ij"), -1)
    offsets = offsets.reshape(-1, d) @ stride

    ii, jj = [], []
    for off in offsets:
        target = keys + off
        left = np.searchsorted(sorted_keys, target, side="left")
        right = np.searchsorted(sorted_keys, target, side="right")
        counts = right - left
        total = int(counts.sum())
        if total == 0:
            continue
        src = np.repeat(np.arange(n), counts)
        first = np.repeat(left - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
        dst = order[np.arange(total) + first]
        keep = src < dst
        ii.append(src[keep])
        jj.append(dst[keep])
    i = np.concatenate(ii) if ii else np.zeros(0, dtype=np.int64)
    j = np.concatenate(jj) if jj else np.zeros(0, dtype=np.int64)
    d2 = ((pts[i] - pts[j]) ** 2).sum(axis=1)
    keep = d2 < r * r
    return i[keep], j[keep]


def _hook_compress(n: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Vectorised union-find: hook larger roots under smaller, then compress."""
    parent = np.arange(n, dtype=np.int64)
    while True:
        pi, pj = parent[i], parent[j]
        lo, hi = np.minimum(pi, pj), np.maximum(pi, pj)
        diff = lo != hi
        if not diff.any():
            return parent
        np.minimum.at(parent, hi[diff], lo[diff])
        while True:
            nxt = parent[parent]
            if np.array_equal(nxt, parent):
                break
            parent = nxt


def _relabel(roots: np.ndarray) -> np.ndarray:
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    # consecutive labels by first appearance, matching the compiled kernel
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse].astype(np.int64)


def gilbert_labels(pts: np.ndarray, r: float) -> tuple[np.ndarray, int]:
    n = pts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0
    i, j = close_pairs(pts, r)
    labels = _relabel(_hook_compress(n, i, j))
    return labels, int(n - (labels.max() + 1))


def origin_reach(pts: np.ndarray, r: float, half: float) -> bool:
    if pts.shape[0] == 0:
        return False
    labels, _ = gilbert_labels(pts, r)
    member = labels == labels[0]
    return bool((np.abs(pts[member]).max(axis=1) >= half).any())


def escape_threshold(pts, marks, order, r, half) -> float:
    n = pts.shape[0]
    if n == 0:
        return float("inf")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    i, j = close_pairs(pts, r)
    # an edge appears when its later endpoint switches on
    t = np.maximum(rank[i], rank[j])
    by_t = np.argsort(t, kind="stable")
    i, j, t = i[by_t], j[by_t], t[by_t]
    parent = list(range(n))
    edge = list(np.abs(pts).max(axis=1) >= half)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    rank0 = int(rank[0])
    e = 0
    m = len(t)
    for step in range(n):
        while e < m and t[e] == step:
            a, b = find(int(i[e])), find(int(j[e]))
            if a != b:
                parent[b] = a
                edge[a] = edge[a] or edge[b]
            e += 1
        if step >= rank0 and edge[find(0)]:
            return float(marks[order[step]])
    return float("inf")


def edge_labels(n: int, edges: np.ndarray) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return _relabel(_hook_compress(n, edges[:, 0], edges[:, 1]))
