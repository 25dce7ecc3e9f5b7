import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coxperc.errors import DegenerateInputError, UnsupportedDimensionError
from coxperc.geom import cube, incircle
from coxperc.tessellations import (
    delaunay_length_intensity,
    delaunay_segments,
    delaunay_triangles,
    line_tessellation,
    lines_to_segments,
    voronoi_length_intensity,
    voronoi_segments,
)


def test_two_seed_bisector():
    sys = voronoi_segments([(-1.0, 0.0), (1.0, 0.0)], cube(4.0))
    assert len(sys) == 1
    assert sys.total_length == pytest.approx(4.0)
    assert np.allclose(sys.vertices[:, 0], 0.0)


def test_three_seeds_meet_at_circumcenter():
    seeds = np.array([(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)])
    sys = voronoi_segments(seeds, cube(10.0))
    assert len(sys) == 3
    deg = np.bincount(sys.edges.ravel(), minlength=len(sys.vertices))
    hub = sys.vertices[deg == 3]
    assert np.allclose(hub, [[1.0, 1.0]])


def test_voronoi_errors():
    with pytest.raises(DegenerateInputError):
        voronoi_segments([(0.0, 0.0)], cube(2.0))
    with pytest.raises(UnsupportedDimensionError):
        voronoi_segments(np.zeros((4, 3)), cube(2.0))


def test_voronoi_edges_equidistant(rng):
    seeds = rng.uniform(-5, 5, (500, 2))
    sys = voronoi_segments(seeds, cube(8.0))
    mids = 0.5 * (sys.a + sys.b)
    d = np.linalg.norm(mids[:, None, :] - seeds[None, :, :], axis=2)
    d.sort(axis=1)
    assert np.all(d[:, 1] - d[:, 0] < 1e-6)
    assert np.all(d[:, 2] - d[:, 1] > 1e-9)
    # generators are the two nearest seeds
    g = sys.generators
    dg = np.linalg.norm(mids[:, None, :] - seeds[g], axis=2)
    assert np.allclose(dg[:, 0], d[:, 0]) and np.allclose(dg[:, 1], d[:, 0])


def test_delaunay_three_and_four_seeds():
    sys = delaunay_segments([(0, 0), (1, 0), (0, 1)], cube(4.0))
    assert len(sys) == 3
    quad = np.array([(0.0, 0.0), (2.0, 0.0), (2.2, 1.0), (0.0, 1.0)])
    tri = delaunay_triangles(quad)
    for t in tri:
        for k in range(4):
            if k not in t:
                assert incircle(*quad[t], quad[k]) <= 0


def test_delaunay_collinear():
    with pytest.raises(DegenerateInputError):
        delaunay_segments([(0, 0), (1, 1), (2, 2)], cube(4.0))


def test_delaunay_empty_circumcircle(rng):
    seeds = rng.uniform(-5, 5, (500, 2))
    tri = delaunay_triangles(seeds)
    a, b, c = seeds[tri[:, 0]], seeds[tri[:, 1]], seeds[tri[:, 2]]
    # in-circle determinant for every (triangle, seed) pair
    rows = []
    for p in (a, b, c):
        diff = p[:, None, :] - seeds[None, :, :]
        rows.append(np.stack([diff[..., 0], diff[..., 1], (diff**2).sum(-1)], axis=-1))
    det = np.linalg.det(np.stack(rows, axis=-2))
    assert (det > 1e-9).sum() == 0


def test_duality_interior(rng):
    seeds = rng.uniform(-5, 5, (300, 2))
    big = cube(40.0)
    vor = voronoi_segments(seeds, big)
    dela = delaunay_segments(seeds, big)
    inner = set(np.flatnonzero(np.abs(seeds).max(axis=1) < 3.0).tolist())

    def pairs(sys):
        return {tuple(sorted(p)) for p in sys.generators.tolist() if set(p) <= inner}

    assert pairs(vor) == pairs(dela) and len(pairs(vor)) > 50


def test_lines_forced():
    assert len(line_tessellation(0.0, cube(2.0), 1)) == 0
    sys = lines_to_segments([math.pi / 2], [0.0], cube(2.0))
    assert len(sys) == 1 and sys.total_length == pytest.approx(2.0)


@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["vor", "del", "lines"]))
def test_clipping_exact(seed, kind):
    g = np.random.default_rng(seed)
    w = cube(3.0, center=(0.5, -0.25))
    if kind == "lines":
        sys = line_tessellation(3.0, w, g)
    else:
        seeds = g.uniform(-4, 4, (40, 2))
        sys = (voronoi_segments if kind == "vor" else delaunay_segments)(seeds, w)
    assert np.all(w.contains(sys.vertices)) if len(sys) else True
    assert np.all(sys.lengths > 0)
    assert sys.total_length == pytest.approx(sys.lengths.sum(), rel=1e-9)


def test_line_length_intensity(rng):
    w = cube(6.0)
    mean = np.mean([line_tessellation(2.0, w, rng).total_length / w.volume for _ in range(400)])
    assert mean == pytest.approx(2.0, rel=0.05)


def test_length_intensity_formulas():
    assert voronoi_length_intensity(100.0) == pytest.approx(20.0)
    assert delaunay_length_intensity((20.0 * 3 * math.pi / 32) ** 2) == pytest.approx(20.0)


def test_segment_csv(tmp_path):
    sys = voronoi_segments([(-1.0, 0.0), (1.0, 0.0)], cube(4.0))
    sys.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "x1,y1,x2,y2,length" and len(lines) == 2
