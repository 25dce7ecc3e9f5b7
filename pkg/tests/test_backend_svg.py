import os
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np

from coxperc import kernels
from coxperc.geom import cube
from coxperc.svg import curves_svg, snapshot_svg


def test_pure_fallback_selected_by_env():
    env = dict(os.environ, COXPERC_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import coxperc.kernels as k; print(k.BACKEND)"],
                         capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"


def test_backends_agree_on_all_kernels():
    if kernels.BACKEND != "cython":
        return
    py, cy = kernels.backend("python"), kernels.backend("cython")
    g = np.random.default_rng(8)
    for _ in range(20):
        pts = np.vstack([np.zeros((1, 2)), g.uniform(-3, 3, (g.integers(0, 200), 2))])
        marks = g.random(len(pts))
        assert kernels.origin_reach(pts, 0.4, 2.0, py) == kernels.origin_reach(pts, 0.4, 2.0, cy)
        assert kernels.escape_threshold(pts, marks, 0.4, 2.0, py) == kernels.escape_threshold(pts, marks, 0.4, 2.0, cy)
        edges = g.integers(0, 50, (60, 2))
        assert np.array_equal(kernels.edge_labels(50, edges, py), kernels.edge_labels(50, edges, cy))


def test_svg_well_formed():
    doc = curves_svg({"a <b>": ([0, 1, 2], [0.0, 0.5, 1.0], [0.01, 0.02, 0.0])}, "t & u")
    ET.fromstring(doc)
    segs = np.array([[[0.0, 0.0], [1.0, 1.0]]])
    ET.fromstring(snapshot_svg(cube(2.0), segments=segs, points=np.zeros((3, 2))))
    ET.fromstring(snapshot_svg(cube(2.0), density=np.ones((4, 4))))
