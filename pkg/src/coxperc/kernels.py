"""Connectivity kernels, compiled when available.

The compiled extension ``coxperc._core`` is used unless it failed to build or
``COXPERC_PURE=1`` is set in the environment; the numpy fallback in
``coxperc._pycore`` then takes over with identical results.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pycore

BACKEND = "python"
_impl = _pycore
if os.environ.get("COXPERC_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pycore


def _as_points(pts) -> np.ndarray:
    arr = np.ascontiguousarray(pts, dtype=np.float64)
    if arr.ndim != 2:
        arr = arr.reshape(len(arr), -1)
    return arr


def backend(name: str | None = None):
    """Return the kernel module by name (``"cython"`` or ``"python"``)."""
    if name is None:
        return _impl
    if name == "python":
        return _pycore
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")


def gilbert_labels(pts, r: float, impl=None) -> tuple[np.ndarray, int]:
    impl = impl or _impl
    return impl.gilbert_labels(_as_points(pts), float(r))


def origin_reach(pts, r: float, half: float, impl=None) -> bool:
    impl = impl or _impl
    return bool(impl.origin_reach(_as_points(pts), float(r), float(half)))


def escape_threshold(pts, marks, r: float, half: float, impl=None) -> float:
    """Smallest mark at which point 0 escapes; point 0 is always switched on first."""
    impl = impl or _impl
    pts = _as_points(pts)
    marks = np.ascontiguousarray(marks, dtype=np.float64)
    if len(marks) != len(pts):
        raise ValueError("marks and points differ in length")
    if len(pts) == 0:
        return float("inf")
    key = marks.copy()
    key[0] = -np.inf
    order = np.ascontiguousarray(np.argsort(key, kind="stable"), dtype=np.int64)
    return float(impl.escape_threshold(pts, marks, order, float(r), float(half)))


def edge_labels(n: int, edges, impl=None) -> np.ndarray:
    impl = impl or _impl
    edges = np.ascontiguousarray(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
    return impl.edge_labels(int(n), edges)
