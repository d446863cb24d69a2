import math

import numpy as np
import pytest

from noonsim.background import (
    ALL_CHANNELS,
    CHANNEL_DC_LO,
    DC,
    DEFAULT_CHANNELS,
    FIG2_ANALYZER,
    FIG2_DETECTORS,
    LO,
    BackgroundError,
    Fringe,
    OperatingRatios,
    SourceFringes,
    SourceModel,
    SourceRates,
    accidental_triples,
    background_decomposition,
    calibrate_operating_point,
    per_pulse_enumeration_oracle,
)

# frozen from the calibrated default operating point
DECOMPOSITION = {0: 22.0, 1: 3.2768304914744166, 2: 14.391574724172475, 3: 1.824874623871611}
SIGNAL_RATE = 7.822222222222225


def flat_rates(single, double, interval=30.0, tau=12.5e-9):
    dets = FIG2_DETECTORS
    pairs = {(a, b): Fringe.constant(double) for i, a in enumerate(dets) for b in dets[i + 1:]}
    src = SourceFringes({d: Fringe.constant(single) for d in dets}, pairs)
    return SourceRates({LO: src, DC: src}, tau, interval)


def test_fringe_validation():
    with pytest.raises(BackgroundError):
        Fringe(1.0, ((1, 2.0, 0.0),))
    f = Fringe.single(2.0, 1.0, 3, 0.5)
    assert f(-0.5 / 3) == pytest.approx(3.0)
    assert Fringe.from_dict(f.to_dict()) == f


def test_rates_round_trip(model):
    r = model.rates(FIG2_ANALYZER)
    back = SourceRates.from_dict(r.to_dict())
    phi = np.linspace(0, 6, 13)
    np.testing.assert_allclose(accidental_triples(back, phi), accidental_triples(r, phi), rtol=1e-12)


def test_flat_channels_closed_form():
    s, d, tau, t = 1e4, 50.0, 12.5e-9, 30.0
    r = flat_rates(s, d, t, tau)
    # three pair choices for each double-single channel
    dc_dc = 3 * d * s * tau * t
    lo_lo_dc = 3 * d * s * tau * t
    lo3 = s**3 * tau**2 * t
    assert accidental_triples(r, 0.0) == pytest.approx(dc_dc + lo_lo_dc + lo3)


def test_matches_per_pulse_enumeration():
    s, d, tau, t = 2e5, 3e3, 12.5e-9, 30.0
    r = flat_rates(s, d, t, tau)
    pulses = t / tau
    # LO singles on three detectors, independent per pulse
    p = s * tau
    assert accidental_triples(r, 0.0, channels=["lo_single_cubed"]) == pytest.approx(
        per_pulse_enumeration_oracle([p, p, p], [0, 1, 2], pulses), rel=1e-12
    )
    # DC double on one pair plus LO/DC single on the third detector
    q = d * tau
    one_pair = per_pulse_enumeration_oracle([q, p], [0, 1], pulses)
    assert accidental_triples(r, 0.0, channels=["dc_double_dc_single"]) == pytest.approx(3 * one_pair, rel=1e-12)


def test_channel_validation():
    r = flat_rates(1.0, 1.0)
    with pytest.raises(BackgroundError):
        accidental_triples(r, 0.0, channels=["nope"])
    with pytest.raises(BackgroundError):
        accidental_triples(r, 0.0, detectors=("+0", "+0", "-0"))
    assert CHANNEL_DC_LO in ALL_CHANNELS and CHANNEL_DC_LO not in DEFAULT_CHANNELS


def test_calibrated_ratios(model):
    r = model.rates(FIG2_ANALYZER)
    lo_s = sum(f.mean for f in r.source(LO).singles.values())
    dc_s = sum(f.mean for f in r.source(DC).singles.values())
    lo_d = sum(f.mean for f in r.source(LO).doubles.values())
    dc_d = sum(f.mean for f in r.source(DC).doubles.values())
    assert lo_s / dc_s == pytest.approx(10.0)
    assert dc_d / lo_d == pytest.approx(5.0)
    grid = np.arange(60) * (2 * math.pi / 60)
    signal = model.signal_counts(FIG2_ANALYZER, _pattern(), grid).mean()
    acc = accidental_triples(r, grid).mean()
    assert signal / acc == pytest.approx(2.0)
    assert model.signal_rate == pytest.approx(SIGNAL_RATE, rel=1e-12)


def _pattern():
    from noonsim.detection import DetectionPattern

    return DetectionPattern(2, 1)


def test_frozen_decomposition(model):
    d = background_decomposition(model.rates(FIG2_ANALYZER))
    for k, amp in DECOMPOSITION.items():
        assert d.amplitude(k) == pytest.approx(amp, rel=1e-9)


def test_calibration_scales_with_target():
    m = calibrate_operating_point(OperatingRatios(accidental_constant=11.0))
    d = background_decomposition(m.rates(FIG2_ANALYZER))
    assert d.amplitude(0) == pytest.approx(11.0)
    assert d.amplitude(2) == pytest.approx(DECOMPOSITION[2] / 2)


def test_model_round_trip(model):
    assert SourceModel.from_dict(model.to_dict()) == model


def test_interval_scaling(model):
    r30 = model.rates(FIG2_ANALYZER, 30.0)
    assert accidental_triples(r30.with_interval(300.0), 0.4) == pytest.approx(10 * accidental_triples(r30, 0.4))
