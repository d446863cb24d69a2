import math

import numpy as np
import pytest

from noonsim.construction import run_paper_chain
from noonsim.detection import (
    AnalyzerConfig,
    ClassicalPhotonSet,
    DetectionError,
    DetectionPattern,
    StationaryPointError,
    click_distribution,
    coincidence_rate,
    detector_event_probability,
    distinguishable_fringe_coefficients,
    distinguishable_triple_rate,
    fanout_distinct_probability,
    harmonic_coefficients,
    pattern_distribution,
    pattern_probability,
    phase_sensitivity,
    quantum_three_phi_visibility,
    three_phi_visibility,
)
from noonsim.fock import noon_state

A21 = AnalyzerConfig(math.radians(45), 2, 1)
A30 = AnalyzerConfig(math.radians(45), 3, 0)


@pytest.fixture(scope="module")
def noon3():
    return noon_state(3)


@pytest.mark.parametrize("phi", np.linspace(0, 2 * math.pi, 9))
def test_pattern_probabilities(noon3, phi, head):
    s = run_paper_chain(phi, head=head).state
    assert pattern_probability(s, A21, DetectionPattern(2, 1)) == pytest.approx(3 * (1 - math.cos(3 * phi)) / 8, abs=1e-12)
    assert pattern_probability(s, A21, DetectionPattern(3, 0)) == pytest.approx((1 + math.cos(3 * phi)) / 8, abs=1e-12)
    assert sum(pattern_distribution(s, A21).values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n,k,expected", [(1, 1, 1.0), (2, 2, 0.5), (3, 3, 2 / 9), (2, 1, 0.0), (1, 4, 1.0)])
def test_fanout(n, k, expected):
    assert fanout_distinct_probability(n, k) == pytest.approx(expected)


def test_coincidence_includes_fanout(head):
    s = run_paper_chain(0.0, head=head).state
    rate = coincidence_rate(s, A30, DetectionPattern(3, 0))
    assert rate == pytest.approx(0.25 * 2 / 9)


def test_efficiency_scales_coincidences(head):
    s = run_paper_chain(1.0, head=head).state
    lossy = AnalyzerConfig(math.radians(45), 2, 1, efficiency=0.5)
    pat = DetectionPattern(2, 1)
    assert coincidence_rate(s, lossy, pat) == pytest.approx(coincidence_rate(s, A21, pat) / 8)


def test_click_distribution_sums_to_one(head):
    s = run_paper_chain(0.3, head=head).state
    assert sum(click_distribution(s, A21).values()) == pytest.approx(1.0)
    p_all = detector_event_probability(s, A21, [("+", 0), ("+", 1), ("-", 0)])
    assert p_all == pytest.approx(coincidence_rate(s, A21, DetectionPattern(2, 1)))


def test_analyzer_validation():
    with pytest.raises(DetectionError):
        AnalyzerConfig(0.0, 0, 0)
    with pytest.raises(DetectionError):
        AnalyzerConfig(0.0, 1, 1, efficiency=1.5)
    a = AnalyzerConfig(0.3, 3, 0, 0.9)
    assert AnalyzerConfig.from_dict(a.to_dict()) == a


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("phi", [0.1, 0.37, 1.2])
def test_heisenberg_sensitivity(n, phi):
    assert phase_sensitivity(n, phi) == pytest.approx(1 / n, abs=1e-12)


def test_stationary_point_raises():
    with pytest.raises(StationaryPointError):
        phase_sensitivity(2, 0.0)


def test_quantum_visibility_is_one(head):
    assert quantum_three_phi_visibility(head.state, A21, DetectionPattern(2, 1)) == pytest.approx(1.0, abs=1e-12)


def test_harmonic_coefficients_of_cosine():
    grid = np.arange(16) * (2 * math.pi / 16)
    c = harmonic_coefficients(2 + np.cos(3 * grid))
    assert c[0].real == pytest.approx(2)
    assert abs(c[3]) == pytest.approx(0.5)


def test_distinguishable_coefficients_match_sampled_rate():
    photons = ClassicalPhotonSet.elliptical([0.4, 0.9, 1.2], [0.0, 1.0, 2.5])
    grid = np.arange(16) * (2 * math.pi / 16)
    sampled = harmonic_coefficients(distinguishable_triple_rate(photons, grid, A21, DetectionPattern(2, 1)))
    exact = distinguishable_fringe_coefficients(photons, A21, DetectionPattern(2, 1))
    np.testing.assert_allclose(exact[:4], sampled[:4], atol=1e-12)


def test_symmetric_linear_photons_have_no_three_phi():
    # photons at 0, 60 and 120 degrees: the (3,0) fringe is pure 2phi
    photons = ClassicalPhotonSet.linear([0.0, math.radians(60), math.radians(120)])
    grid = np.arange(16) * (2 * math.pi / 16)
    vis, r1, r2 = three_phi_visibility(distinguishable_triple_rate(photons, grid, A30, DetectionPattern(3, 0)))
    assert vis < 1e-12 and r1 < 1e-12
    assert r2 == pytest.approx(0.6)


def test_classical_photon_set_requires_normalized():
    with pytest.raises(DetectionError):
        ClassicalPhotonSet(((1.0, 1.0),))
