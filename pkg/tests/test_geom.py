import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coxperc.errors import ParameterError, RejectedInputError
from coxperc.geom import (
    BoxWindow,
    Segment,
    ball_lengths,
    ball_volume,
    build_grid,
    circumcenters,
    clip_segments,
    clipped_lengths,
    cube,
    incircle,
    neighbors_within,
    orient2d,
)


def brute_neighbors(points, p, r):
    d = np.linalg.norm(np.asarray(points) - np.asarray(p), axis=1)
    return sorted(np.flatnonzero(d < r).tolist())


def test_box_basics():
    w = cube(3.0)
    assert w.dim == 2 and w.volume == 9.0
    assert np.allclose(w.lower, [-1.5, -1.5])
    assert w.contains([[1.5, 0.0]]).all()
    assert not w.contains([[1.6, 0.0]]).any()
    assert w.contains_box(cube(1.0, center=(1.0, 1.0)))
    assert not w.contains_box(cube(2.0, center=(1.0, 1.0)))
    assert cube(2.0, dim=3).volume == 8.0


def test_box_rejects_bad_side():
    with pytest.raises(ParameterError):
        BoxWindow((0.0, 0.0), 0.0)
    with pytest.raises(RejectedInputError):
        BoxWindow((math.nan, 0.0), 1.0)


def test_segment_zero_length_rejected():
    with pytest.raises(ParameterError):
        Segment((0, 0), (0, 0))
    assert Segment((0, 0), (3, 4)).length == 5.0


def test_empty_grid():
    idx = build_grid(np.zeros((0, 2)), 1.0)
    assert idx.buckets == {}
    assert neighbors_within(idx, (0, 0), 1.0) == []


def test_quantization():
    idx = build_grid([(0.1, 0.1), (0.9, 0.9)], 1.0)
    assert idx.buckets == {(0, 0): [0, 1]}


def test_nonfinite_rejected():
    with pytest.raises(RejectedInputError):
        build_grid([(0.0, math.inf)], 1.0)


def test_strict_boundary_and_self():
    idx = build_grid([(0.0, 0.0), (1.0, 0.0)], 1.0)
    assert neighbors_within(idx, (0.0, 0.0), 1.0) == [0]
    assert neighbors_within(build_grid([(0.3, 0.2)], 1.0), (0.3, 0.2), 1.0) == [0]


def test_bad_radius():
    idx = build_grid([(0.0, 0.0)], 1.0)
    with pytest.raises(ParameterError):
        neighbors_within(idx, (0, 0), 0.0)


def test_grid_matches_scan_100_points(rng):
    pts = cube(10.0).uniform(rng, 100)
    idx = build_grid(pts, 0.5)
    for p in pts:
        assert neighbors_within(idx, p, 0.5) == brute_neighbors(pts, p, 0.5)


def test_grid_matches_scan_200_points(rng):
    pts = cube(3.0).uniform(rng, 200)
    idx = build_grid(pts, 0.3)
    for p in rng.uniform(-1.5, 1.5, (50, 2)):
        assert neighbors_within(idx, p, 0.3) == brute_neighbors(pts, p, 0.3)


@given(
    n=st.integers(0, 500),
    r=st.sampled_from([0.1, 0.5, 1.0]),
    dim=st.sampled_from([2, 3]),
    seed=st.integers(0, 2**31),
)
def test_grid_equals_scan_property(n, r, dim, seed):
    g = np.random.default_rng(seed)
    pts = g.uniform(-2, 2, (n, dim))
    idx = build_grid(pts, r)
    total = sum(len(v) for v in idx.buckets.values())
    assert total == n
    for p in g.uniform(-2, 2, (5, dim)):
        assert set(neighbors_within(idx, p, r)) == set(brute_neighbors(pts, p, r))


def test_clip_forced_geometry():
    a, b = np.array([[0.0, 0.0]]), np.array([[2.0, 0.0]])
    assert clipped_lengths(a, b, cube(2.0))[0] == pytest.approx(1.0)
    t0, t1, ok = clip_segments(np.array([[5.0, 5.0]]), np.array([[6.0, 5.0]]), cube(2.0))
    assert not ok[0]


@given(seed=st.integers(0, 2**31))
def test_clip_additive_over_partition(seed):
    g = np.random.default_rng(seed)
    a, b = g.uniform(-3, 3, (20, 2)), g.uniform(-3, 3, (20, 2))
    whole = clipped_lengths(a, b, cube(4.0)).sum()
    parts = sum(clipped_lengths(a, b, cube(2.0, center=c)).sum() for c in [(-1, -1), (-1, 1), (1, -1), (1, 1)])
    assert parts == pytest.approx(whole, rel=1e-9, abs=1e-12)


def test_ball_chords():
    a, b = np.array([[-3.0, 0.0]]), np.array([[3.0, 0.0]])
    assert ball_lengths(a, b, (0.0, 0.0), 0.5)[0] == pytest.approx(1.0)
    a2 = np.array([[-3.0, 1.0]])
    b2 = np.array([[3.0, 1.0]])
    assert ball_lengths(a2, b2, (0.0, 0.0), 0.5)[0] == 0.0


def test_ball_volume():
    assert ball_volume(1.0, 2) == pytest.approx(math.pi)
    assert ball_volume(2.0, 3) == pytest.approx(4 / 3 * math.pi * 8)


def test_predicates():
    assert orient2d((0, 0), (1, 0), (0, 1)) == 1
    assert orient2d((0, 0), (1, 0), (2, 0)) == 0
    assert incircle((0, 0), (1, 0), (0, 1), (0.5, 0.5)) == 1
    assert incircle((0, 0), (1, 0), (0, 1), (1, 1)) == 0
    assert incircle((0, 0), (1, 0), (0, 1), (3, 3)) == -1


def test_circumcenters():
    tri = np.array([[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]])
    assert np.allclose(circumcenters(tri), [[1.0, 1.0]])
