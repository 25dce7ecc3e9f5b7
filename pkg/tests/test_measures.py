import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coxperc.errors import OutOfWindowError, ParameterError, UnsupportedDiagnosticError, UnsupportedDimensionError
from coxperc.geom import cube
from coxperc.measures import (
    ConstantLebesgue,
    DelaunayEdges,
    ModulatedBoolean,
    PoissonLines,
    SegmentRealization,
    ShotNoise,
    VoronoiEdges,
    aec_check,
    calibrate,
    calibration_constant,
    exact_mean_mass,
    measure_of_ball,
    measure_of_box,
    nearest_seed_sup,
    palm_draw,
    sample_measure,
    seed_intensity_for_length,
    spec_from_dict,
    spec_hash,
    spec_to_dict,
    stabilization_bound,
    stabilization_diagnostics,
    stabilization_radius_sup,
)
from coxperc.tessellations import SegmentSystem, voronoi_segments


def segment_real(a, b, side=4.0, norm=1.0):
    sys = SegmentSystem(np.array([a, b], float), np.array([[0, 1]]), cube(side))
    return SegmentRealization(VoronoiEdges(1.0, normalization=norm), cube(side), sys)


def field_oracle(sources, height, radius, points):
    d2 = ((points[:, None, :] - sources[None, :, :]) ** 2).sum(-1)
    return height * (d2 <= radius * radius).sum(1)


# -- specs --------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ParameterError):
        ShotNoise(0.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        ConstantLebesgue(-1.0)
    with pytest.raises(UnsupportedDimensionError):
        VoronoiEdges(1.0, dim=3)


@pytest.mark.parametrize(
    "spec",
    [
        ShotNoise(0.1, 2.0, 5.0),
        ModulatedBoolean(0.2, 3.0, 4.0, 1.0, dim=3),
        VoronoiEdges(7.0, normalization=0.5),
        DelaunayEdges(7.0),
        PoissonLines(2.0),
        ConstantLebesgue(1.5),
    ],
)
def test_spec_round_trip(spec):
    assert spec_from_dict(spec_to_dict(spec)) == spec
    assert spec_hash(spec) == spec_hash(spec_from_dict(json.loads(json.dumps(spec_to_dict(spec)))))


def test_hash_without_normalization():
    a, b = VoronoiEdges(4.0), VoronoiEdges(4.0, normalization=3.0)
    assert spec_hash(a) != spec_hash(b)
    assert spec_hash(a, False) == spec_hash(b, False)


# -- sampling and masses ------------------------------------------------------


def test_constant_trivial():
    real = sample_measure(ConstantLebesgue(1.0), cube(3.0), 0)
    assert measure_of_box(real, cube(1.0)) == 1.0
    assert measure_of_box(sample_measure(ConstantLebesgue(2.0), cube(3.0), 0), cube(3.0)) == 18.0
    real3 = sample_measure(ConstantLebesgue(2.0, dim=3), cube(3.0, dim=3), 0)
    assert measure_of_box(real3, cube(3.0, dim=3)) == pytest.approx(54.0)


def test_zero_shot_noise():
    real = sample_measure(ShotNoise(0.1, 1.0, 0.0), cube(2.0), 0)
    assert real.is_zero() and measure_of_box(real, cube(1.0)) == 0.0
    x, w = palm_draw(real, cube(1.0), 0)
    assert x is None and w == 0.0


def test_out_of_window():
    real = sample_measure(ConstantLebesgue(1.0), cube(2.0), 0)
    with pytest.raises(OutOfWindowError):
        measure_of_box(real, cube(3.0))


def test_segment_box_and_ball():
    real = segment_real((0.0, 0.0), (2.0, 0.0))
    assert measure_of_box(real, cube(2.0)) == pytest.approx(1.0)
    real = segment_real((-1.5, 0.0), (1.5, 0.0))
    assert measure_of_ball(real, (0.0, 0.0), 0.7) == pytest.approx(1.4)


def test_constant_ball_area():
    real = sample_measure(ConstantLebesgue(1.0), cube(3.0), 0)
    h = real.pitch
    assert abs(measure_of_ball(real, (0.0, 0.0), 1.0) - math.pi) <= 2 * h * 2 * math.pi


def test_shot_noise_box_matches_fine_quadrature(rng):
    spec = ShotNoise(0.3, 2.0, 3.0)
    real = sample_measure(spec, cube(6.0), rng)
    box = cube(5.0)
    h = real.pitch / 4
    axes = [box.lower[k] + (np.arange(int(round(5.0 / h))) + 0.5) * h for k in range(2)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2)
    fine = field_oracle(real.sources, 2.0, 0.3, grid).sum() * h * h
    assert measure_of_box(real, box) == pytest.approx(fine, rel=0.01)


def test_voronoi_ball_matches_oversampled_clip(rng):
    real = sample_measure(VoronoiEdges(50.0), cube(3.0), rng)
    sys = real.system
    # oracle: dense sampling along each edge, 10x finer than the ball radius scale
    oracle = 0.0
    center, radius = np.array([0.1, -0.2]), 0.8
    for a, b, ln in zip(sys.a, sys.b, sys.lengths):
        k = max(10, int(ln / 1e-4))
        t = (np.arange(k) + 0.5) / k
        pts = a + t[:, None] * (b - a)
        oracle += ln * (np.linalg.norm(pts - center, axis=1) <= radius).mean()
    assert measure_of_ball(real, center, radius) == pytest.approx(oracle, rel=0.005)


def test_palm_draw_constant(rng):
    real = sample_measure(ConstantLebesgue(1.0), cube(3.0), 0)
    xs = []
    for _ in range(200):
        x, w = palm_draw(real, cube(1.0), rng)
        assert w == 1.0
        xs.append(x)
    xs = np.array(xs)
    assert np.all(np.abs(xs) <= 0.5) and abs(xs.mean()) < 0.1


def test_palm_draw_on_segment(rng):
    real = segment_real((-1.0, 0.25), (1.0, 0.25))
    x, w = palm_draw(real, cube(1.0), rng)
    assert w == pytest.approx(1.0)
    assert x[1] == pytest.approx(0.25) and abs(x[0]) <= 0.5


def test_voronoi_length_intensity(rng):
    spec = VoronoiEdges(100.0)
    vals = np.array([measure_of_box(sample_measure(spec, cube(1.0), rng), cube(1.0)) for _ in range(400)])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - 20.0) < 3 * se


@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["vor", "del", "lines"]))
def test_segment_mass_additive(seed, kind):
    spec = {"vor": VoronoiEdges(20.0), "del": DelaunayEdges(20.0), "lines": PoissonLines(5.0)}[kind]
    real = sample_measure(spec, cube(2.0), seed)
    whole = measure_of_box(real, cube(2.0))
    parts = sum(measure_of_box(real, cube(1.0, center=c)) for c in [(-.5, -.5), (-.5, .5), (.5, -.5), (.5, .5)])
    assert parts == pytest.approx(whole, rel=1e-9, abs=1e-12)


@given(seed=st.integers(0, 2**31))
def test_density_mass_additive_on_aligned_cells(seed):
    spec = ShotNoise(0.25, 1.0, 4.0)
    real = sample_measure(spec, cube(2.0), seed)
    whole = measure_of_box(real, cube(2.0))
    parts = sum(measure_of_box(real, cube(1.0, center=c)) for c in [(-.5, -.5), (-.5, .5), (.5, -.5), (.5, .5)])
    assert parts == pytest.approx(whole, rel=1e-12, abs=1e-12)


def test_shot_noise_interior_mass_exact():
    spec = ShotNoise(0.25, 3.0, 0.0)
    real = sample_measure(spec, cube(4.0), 0, pitch=0.25 / 8)
    real = type(real)(spec, real.window, real.pitch, np.array([[0.0, 0.0], [1.0, 0.5]]), real.anchor)
    per = measure_of_ball(real, (0.0, 0.0), 0.25)
    total = measure_of_box(real, cube(4.0))
    assert total == pytest.approx(2 * per, rel=1e-12)
    assert per == pytest.approx(3.0 * math.pi * 0.25**2, rel=0.05)


def test_stationarity(rng):
    spec = VoronoiEdges(25.0)
    win = cube(4.0)
    a = [measure_of_box(sample_measure(spec, win, rng), cube(1.0)) for _ in range(300)]
    b = [measure_of_box(sample_measure(spec, win, rng), cube(1.0, center=(1.4, -1.2))) for _ in range(300)]
    se = math.hypot(np.std(a, ddof=1), np.std(b, ddof=1)) / math.sqrt(300)
    assert abs(np.mean(a) - np.mean(b)) < 3 * se


# -- normalization ------------------------------------------------------------


def test_exact_means():
    assert exact_mean_mass(ConstantLebesgue(2.0)) == 2.0
    sn = ShotNoise(0.1, 2.0, 5.0)
    assert exact_mean_mass(sn) == pytest.approx(5.0 * 2.0 * math.pi * 0.01)
    mb = ModulatedBoolean(0.1, 10.0, 3.0, 1.0)
    p = 1 - math.exp(-10.0 * math.pi * 0.01)
    assert exact_mean_mass(mb) == pytest.approx(3 * p + (1 - p))
    assert exact_mean_mass(VoronoiEdges(1.0)) is None


def test_seed_intensity_for_length():
    assert seed_intensity_for_length("voronoi", 20.0) == pytest.approx(100.0)
    assert seed_intensity_for_length("lines", 3.0) == 3.0
    with pytest.raises(ParameterError):
        seed_intensity_for_length("constant", 1.0)


def test_calibration_sidecar(tmp_path):
    cache = tmp_path / "cal.json"
    spec = VoronoiEdges(4.0)
    entry = calibration_constant(spec, 20, 3, cache)
    stored = json.loads(cache.read_text())
    assert stored[spec_hash(spec, False)] == entry
    assert entry["raw_intensity"] == pytest.approx(4.0, rel=0.05)
    again = calibration_constant(spec, 20, 3, cache)
    assert again == entry


@pytest.mark.parametrize(
    "spec",
    [ShotNoise(0.1, 1.0, 20.0), ModulatedBoolean(0.1, 10.0, 3.0, 1.0), VoronoiEdges(9.0), PoissonLines(2.0)],
)
def test_normalized_mean_is_target(spec, rng):
    cal = calibrate(spec, 1.0, replicates=100, seed=11)
    vals = np.array([measure_of_box(sample_measure(cal, cube(1.0), rng), cube(1.0)) for _ in range(600)])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - 1.0) < 3 * se + 0.02


# -- stabilization and AEC ----------------------------------------------------


def test_stabilization_trivial():
    assert stabilization_radius_sup(ConstantLebesgue(1.0), cube(1.0), 0) == 0.0
    assert nearest_seed_sup([[0.0, 0.0]], cube(2.0)) == pytest.approx(math.sqrt(2), abs=2 / 64)
    with pytest.raises(UnsupportedDiagnosticError):
        stabilization_radius_sup(PoissonLines(1.0), cube(1.0), 0)


def test_stabilization_bound_value():
    assert stabilization_bound(VoronoiEdges(100.0), 1.0) == pytest.approx(4 * math.exp(-25.0))


def test_stabilization_diagnostics_small():
    diag = stabilization_diagnostics(VoronoiEdges(100.0), 0.5, 100, 1)
    assert 0.0 <= diag.empirical_prob <= 1.0 and diag.replicates == 100


def test_aec_trivial():
    full = sample_measure(ConstantLebesgue(1.0), cube(2.0), 0)
    res = aec_check(full, 1.0, resolution=32)
    assert res.support_nonempty and res.q_n_support_connected_in_q_2n
    zero = sample_measure(ShotNoise(0.1, 1.0, 0.0), cube(2.0), 0)
    res = aec_check(zero, 1.0, resolution=32)
    assert not res.support_nonempty and not res.q_n_support_connected_in_q_2n


def test_aec_voronoi_when_stabilized(rng):
    spec = VoronoiEdges(100.0)
    n, window = 1.0, cube(2.0)
    checked = fails = 0
    while checked < 60:
        seeds = rng.uniform(-2.0, 2.0, (rng.poisson(1600), 2))
        if nearest_seed_sup(seeds, window) >= n / 2:
            continue
        real = SegmentRealization(spec, window, voronoi_segments(seeds, window))
        checked += 1
        fails += not aec_check(real, n).q_n_support_connected_in_q_2n
    assert fails / checked <= 0.01
