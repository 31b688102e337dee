from __future__ import annotations

import math

import numpy as np
import pytest

from kerrwell.errors import BistabilityLostError, UsageError
from kerrwell.hilbert import ModelParams
from kerrwell.semiclassics import (
    Well,
    analyze_landscape,
    bistability_boundary,
    classical_hamiltonian,
    ebk_curve,
    lobe_action,
    lobe_area,
    orbit_count,
    rabi_frequency,
    resonance_eps1,
    resonance_parabola,
    separatrix_area,
    small_oscillation_frequency,
    triple_intersections,
)


def kpo(e1, e2, phi=0.0):
    return ModelParams.kpo(e1, e2, phi)


def test_origin_has_zero_quasi_energy():
    for p in (kpo(0, 0), kpo(2, 7.7, 0.4), kpo(-1, 3)):
        assert classical_hamiltonian(p, 0.0, 0.0) == 0.0


def test_cut_reproduces_quartic_potential():
    eps1, eps2 = 1.3, 4.0
    x = np.linspace(-3, 3, 13)
    # -V(x) with k4 = -1/4, k2 = -eps2, k1 = sqrt(2) eps1
    expected = x**4 / 4 - eps2 * x**2 - math.sqrt(2) * eps1 * x
    np.testing.assert_allclose(classical_hamiltonian(kpo(eps1, eps2), x, 0 * x), expected)


@pytest.mark.parametrize("eps2", [2.0, 4.0, 7.7, 12.0])
def test_untilted_landscape_closed_form(eps2):
    land = analyze_landscape(kpo(0.0, eps2))
    r = math.sqrt(2 * eps2)
    assert land.asymmetry_A == 0.0
    assert land.shallow[0] == pytest.approx(-r) and land.deep[0] == pytest.approx(r)
    assert land.deep[2] == pytest.approx(-(eps2**2))
    assert land.barrier_heights[0] == pytest.approx(eps2**2, abs=1e-8)
    assert abs(land.barrier_heights[0] - land.barrier_heights[1]) < 1e-10


def test_asymmetry_estimate():
    land = analyze_landscape(kpo(0.5, 7.7))
    assert land.asymmetry_A == pytest.approx(4 * 0.5 * math.sqrt(7.7), rel=0.02)
    assert land.shallow[0] < 0 < land.deep[0]
    assert land.saddle[2] >= max(land.shallow[2], land.deep[2])


def test_momentum_like_drive_keeps_wells_level():
    land = analyze_landscape(kpo(2.0, 7.7, math.pi / 2))
    assert abs(land.asymmetry_A) < 1e-9


def test_mirror_drive_swaps_labels():
    a, b = analyze_landscape(kpo(1.5, 6.0)), analyze_landscape(kpo(-1.5, 6.0))
    assert a.asymmetry_A == pytest.approx(b.asymmetry_A, abs=1e-10)
    assert a.shallow[0] == pytest.approx(-b.shallow[0], abs=1e-10)
    np.testing.assert_allclose(a.barrier_heights, b.barrier_heights, atol=1e-10)


def test_bistability_boundary_closed_form():
    # fold of x^3 - 2 eps2 x - sqrt(2) eps1 = 0
    assert bistability_boundary(kpo(0.0, 7.7)) == pytest.approx(math.sqrt(2) * (2 * 7.7 / 3) ** 1.5, rel=1e-6)
    k2 = 12.6
    assert bistability_boundary(ModelParams.chemical(0.0, k2)) == pytest.approx(4 * k2 / 3 * math.sqrt(k2 / 6), rel=1e-6)


def test_monostable_landscape_reports_boundary():
    with pytest.raises(BistabilityLostError) as info:
        analyze_landscape(kpo(20.0, 7.7))
    assert info.value.boundary == pytest.approx(16.448, abs=1e-3)


@pytest.mark.parametrize("eps2", [1.5, 4.0, 7.7, 12.0])
def test_untilted_lobe_action_is_eps2_over_pi(eps2):
    # each lobe of (x^2+p^2)^2/4 = eps2 (x^2 - p^2) has area 2 eps2
    sh, dp = lobe_action(kpo(0, eps2), Well.SHALLOW), lobe_action(kpo(0, eps2), Well.DEEP)
    assert sh == pytest.approx(eps2 / math.pi, rel=1e-8)
    assert dp == pytest.approx(sh, rel=1e-8)


@pytest.mark.parametrize("eps1,eps2", [(0.7, 4.0), (2.775, 7.7), (5.0, 10.0)])
def test_lobe_action_difference_is_linear_in_drive(eps1, eps2):
    p = kpo(eps1, eps2)
    diff = lobe_action(p, Well.DEEP) - lobe_action(p, Well.SHALLOW)
    assert diff == pytest.approx(eps1 / math.sqrt(eps2), rel=1e-7)


def test_lobes_add_up_to_separatrix():
    p = kpo(0.0, 6.0)
    total = lobe_area(p, Well.SHALLOW) + lobe_area(p, Well.DEEP)
    assert total == pytest.approx(separatrix_area(p), rel=1e-6)


def test_lobe_action_grows_with_depth():
    actions = [lobe_action(kpo(0, e), Well.SHALLOW) for e in np.linspace(1.5, 12, 8)]
    assert np.all(np.diff(actions) > 0)


def test_chemical_lobe_actions_cross_check():
    p = ModelParams.chemical(2.0, 12.6)
    assert lobe_action(p, Well.SHALLOW) < lobe_action(p, Well.DEEP)


def test_harmonic_estimate_is_off_by_four_over_pi():
    # action = eps2/pi while barrier/omega = eps2^2 / (4 eps2); the ratio is exactly 4/pi
    p = kpo(0.0, 2.0)
    land = analyze_landscape(p)
    estimate = land.barrier_heights[0] / land.frequency(Well.SHALLOW)
    assert lobe_action(p, Well.SHALLOW) / estimate == pytest.approx(4 / math.pi, rel=1e-8)


@pytest.mark.parametrize("eps2", [4.0, 6.0, 8.0, 10.0, 12.0])
def test_level_spacing_estimate(eps2):
    assert small_oscillation_frequency(kpo(0.0, eps2)) == pytest.approx(4 * eps2, rel=0.10)


def test_orbit_count():
    assert [orbit_count(a) for a in (0.2, 0.5, 1.49, 1.5, 3.7)] == [0, 1, 1, 2, 4]


def test_ebk_points_satisfy_quantization():
    curve = ebk_curve(1, Well.SHALLOW, [5.0, 7.0, 9.0, 11.0])
    assert curve.points
    for e1, e2 in curve.points:
        assert lobe_action(kpo(e1, e2), Well.SHALLOW) == pytest.approx(1.5, abs=1e-6)


def test_ebk_curve_endpoint_is_symmetric_threshold():
    # symmetric lobe holds n + 1/2 quanta at eps2 = pi (n + 1/2)
    curve = ebk_curve(2, Well.SHALLOW, [2.5 * math.pi])
    e1, _ = curve.points[0]
    assert e1 == pytest.approx(0.0, abs=1e-6)


def test_ebk_curves_bend_opposite_ways():
    shallow = ebk_curve(1, Well.SHALLOW, np.linspace(5.0, 9.0, 5))
    e1, e2 = shallow.as_arrays()
    assert np.all(np.diff(e1) > 0)  # eps2 grows with eps1 along shallow curves
    deep = ebk_curve(3, Well.DEEP, np.linspace(7.0, 10.5, 5))
    e1, e2 = deep.as_arrays()
    assert np.all(np.diff(e1) < 0)


def test_ebk_omits_unreachable_depths():
    curve = ebk_curve(3, Well.SHALLOW, [1.0, 2.0])
    assert curve.points == [] and curve.omitted == [1.0, 2.0]
    with pytest.raises(UsageError):
        ebk_curve(-1, Well.SHALLOW, [5.0])


def test_resonance_parabola_examples():
    assert resonance_eps1(1, 7.7) == pytest.approx(2.775, abs=1e-3)
    assert resonance_parabola(2, 4.0) == pytest.approx(4.0)
    assert resonance_parabola(3, 0.0) == 0.0
    with pytest.raises(UsageError):
        resonance_parabola(0, 1.0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_landscape_asymmetry_tracks_parabolas(n):
    for eps2 in np.linspace(4.0, 12.0, 5):
        land = analyze_landscape(kpo(float(resonance_eps1(n, eps2)), eps2))
        spacing = small_oscillation_frequency(kpo(0.0, eps2))
        assert land.asymmetry_A == pytest.approx(n * spacing, rel=0.05)


@pytest.mark.slow
def test_triple_intersections_contract():
    points = triple_intersections(2, 8, (2.0, 12.0))
    assert points
    for t in points:
        assert abs(t.eps2 - (t.eps1 / t.resonance) ** 2) < 1e-6
        assert lobe_action(kpo(t.eps1, t.eps2), Well.SHALLOW) == pytest.approx(t.n + 0.5, abs=1e-5)
        assert t.m > t.n
        assert abs(t.deep_eps2_offset) <= 0.1


def test_triple_intersections_empty_range():
    assert triple_intersections(1, 2, (0.1, 0.5)) == []
    with pytest.raises(UsageError):
        triple_intersections(1, 2, (3.0, 3.0))


def test_rabi_frequency_limits():
    assert rabi_frequency(1.0, 0.0) == 2.0
    assert rabi_frequency(1.0, 4.0) == 8.0
    assert rabi_frequency(0.0, 5.0) == 0.0
    value, heuristic = rabi_frequency(1.0, 0.5, with_flag=True)
    assert heuristic and 2.0 < value < 4 * math.sqrt(0.5) + 2.0
