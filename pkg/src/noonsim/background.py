"""Accidental three-fold coincidences from uncorrelated sources.

Per-source singles and doubles rates (counts/s, functions of the phase) are
combined pulse by pulse: an event with rate r has probability r * tau in a
pulse of period tau, independent events multiply, and a counting interval
of length T holds T / tau pulses.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .construction import ChainConfig, chain_head
from .detection import AnalyzerConfig, DetectionPattern, click_distribution, coincidence_rate
from .elements import HV, apply_mode_transform, phase_shift, qwp
from .fock import StateVector, apply_creation, make_vacuum
from .fringes import HarmonicDecomposition, fourier_decompose

PULSE_PERIOD_S = 12.5e-9
INTERVAL_S = 30.0

DC, LO = "DC", "LO"

# the three default background processes, in terms of measured rates
CHANNEL_DC_DC = "dc_double_dc_single"  # two DC pairs
CHANNEL_LO_LO_LO = "lo_single_cubed"  # three LO photons
CHANNEL_LO_LO_DC = "lo_double_dc_single"  # two LO photons + one DC pair
CHANNEL_DC_LO = "dc_double_lo_single"  # incoherent one DC pair + one LO photon; off by default
DEFAULT_CHANNELS = (CHANNEL_DC_DC, CHANNEL_LO_LO_LO, CHANNEL_LO_LO_DC)
ALL_CHANNELS = DEFAULT_CHANNELS + (CHANNEL_DC_LO,)


class BackgroundError(ValueError):
    pass


@dataclass(frozen=True)
class Fringe:
    """offset + sum_k amp_k cos(k phi + phase_k), in counts per second."""

    offset: float
    harmonics: tuple[tuple[int, float, float], ...] = ()

    def __post_init__(self):
        amps = [a for _, a, _ in self.harmonics]
        if any(a < 0 for a in amps):
            raise BackgroundError("fringe amplitudes must be non-negative")
        if self.offset < sum(amps) - 1e-12 * max(1.0, abs(self.offset)):
            raise BackgroundError(f"fringe can go negative: offset {self.offset} < amplitudes {sum(amps)}")

    @classmethod
    def constant(cls, rate: float) -> Fringe:
        return cls(float(rate))

    @classmethod
    def single(cls, offset: float, amplitude: float, harmonic: int, phase: float = 0.0) -> Fringe:
        return cls(float(offset), ((int(harmonic), float(amplitude), float(phase)),))

    @classmethod
    def from_decomposition(cls, dec: HarmonicDecomposition, tol: float = 1e-12) -> Fringe:
        offset = dec.amplitude(0)
        hs = tuple((k, a, p) for k, (a, p) in sorted(dec.components.items()) if k > 0 and a > tol * max(offset, 1e-300))
        # clip roundoff so the sufficient non-negativity check holds
        total = sum(a for _, a, _ in hs)
        if total > offset:
            offset = total
        return cls(offset, hs)

    def __call__(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        out = np.full_like(phi, self.offset)
        for k, a, p in self.harmonics:
            out = out + a * np.cos(k * phi + p)
        return out

    def scaled(self, factor: float) -> Fringe:
        return Fringe(self.offset * factor, tuple((k, a * factor, p) for k, a, p in self.harmonics))

    @property
    def mean(self) -> float:
        return self.offset

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "harmonics": [{"k": k, "amplitude": a, "phase": p} for k, a, p in self.harmonics],
        }

    @classmethod
    def from_dict(cls, data: Mapping | float) -> Fringe:
        if isinstance(data, (int, float)):
            return cls.constant(data)
        if "harmonics" in data:
            hs = tuple((int(h["k"]), float(h["amplitude"]), float(h.get("phase", 0.0))) for h in data["harmonics"])
            return cls(float(data["offset"]), hs)
        return cls.single(data["offset"], data.get("amplitude", 0.0), data.get("harmonic", 1), data.get("phase", 0.0))


def _pair_key(d1: str, d2: str) -> tuple[str, str]:
    return tuple(sorted((d1, d2)))


@dataclass(frozen=True)
class SourceFringes:
    """Singles per detector and doubles per unordered detector pair for one source."""

    singles: Mapping[str, Fringe]
    doubles: Mapping[tuple[str, str], Fringe] = field(default_factory=dict)

    def single(self, d: str) -> Fringe:
        return self.singles.get(d, Fringe.constant(0.0))

    def double(self, d1: str, d2: str) -> Fringe:
        return self.doubles.get(_pair_key(d1, d2), Fringe.constant(0.0))

    def scaled(self, singles: float = 1.0, doubles: float = 1.0) -> SourceFringes:
        return SourceFringes(
            {d: f.scaled(singles) for d, f in self.singles.items()},
            {p: f.scaled(doubles) for p, f in self.doubles.items()},
        )

    def to_dict(self) -> dict:
        return {
            "singles": {d: f.to_dict() for d, f in sorted(self.singles.items())},
            "doubles": {f"{a}|{b}": f.to_dict() for (a, b), f in sorted(self.doubles.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> SourceFringes:
        singles = {d: Fringe.from_dict(f) for d, f in data.get("singles", {}).items()}
        doubles = {}
        for key, f in data.get("doubles", {}).items():
            a, b = key.split("|")
            doubles[_pair_key(a, b)] = Fringe.from_dict(f)
        return cls(singles, doubles)


@dataclass(frozen=True)
class SourceRates:
    sources: Mapping[str, SourceFringes]
    pulse_period: float = PULSE_PERIOD_S
    counting_interval: float = INTERVAL_S

    def __post_init__(self):
        if self.pulse_period <= 0 or self.counting_interval <= 0:
            raise BackgroundError("pulse period and counting interval must be positive")
        unknown = set(self.sources) - {DC, LO}
        if unknown:
            raise BackgroundError(f"unknown sources {sorted(unknown)}; expected DC and LO")

    def source(self, name: str) -> SourceFringes:
        return self.sources.get(name, SourceFringes({}))

    def with_interval(self, interval: float) -> SourceRates:
        return SourceRates(self.sources, self.pulse_period, interval)

    def to_dict(self) -> dict:
        return {
            "pulse_period_s": self.pulse_period,
            "interval_s": self.counting_interval,
            "sources": {k: v.to_dict() for k, v in sorted(self.sources.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> SourceRates:
        return cls(
            {k: SourceFringes.from_dict(v) for k, v in data["sources"].items()},
            float(data.get("pulse_period_s", PULSE_PERIOD_S)),
            float(data.get("interval_s", INTERVAL_S)),
        )


def _triple_channels(rates: SourceRates, phi: np.ndarray, detectors: Sequence[str]) -> dict[str, np.ndarray]:
    tau = rates.pulse_period
    pulses = rates.counting_interval / tau
    dc, lo = rates.source(DC), rates.source(LO)
    out = {c: np.zeros_like(phi) for c in ALL_CHANNELS}

    def double_single(dsrc: SourceFringes, ssrc: SourceFringes) -> np.ndarray:
        acc = np.zeros_like(phi)
        for k in range(3):
            pair = [d for j, d in enumerate(detectors) if j != k]
            acc = acc + (dsrc.double(*pair)(phi) * tau) * (ssrc.single(detectors[k])(phi) * tau)
        return acc * pulses

    out[CHANNEL_DC_DC] = double_single(dc, dc)
    out[CHANNEL_LO_LO_DC] = double_single(lo, dc)
    out[CHANNEL_DC_LO] = double_single(dc, lo)
    out[CHANNEL_LO_LO_LO] = pulses * np.prod([lo.single(d)(phi) * tau for d in detectors], axis=0)
    return out


def accidental_triples(
    rates: SourceRates,
    phi,
    detectors: Sequence[str] = ("+0", "+1", "-0"),
    channels: Sequence[str] = DEFAULT_CHANNELS,
) -> np.ndarray | float:
    """Expected accidental three-fold coincidences per counting interval.

    A double on two of the ``detectors`` from one source with a single on the
    third from another (or the same) source, summed over the three pair
    choices; plus three independent LO singles.
    """
    if len(detectors) != 3 or len(set(detectors)) != 3:
        raise BackgroundError("need three distinct detectors")
    unknown = set(channels) - set(ALL_CHANNELS)
    if unknown:
        raise BackgroundError(f"unknown channels {sorted(unknown)}")
    scalar = np.ndim(phi) == 0
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    parts = _triple_channels(rates, phi, detectors)
    total = sum((parts[c] for c in channels), np.zeros_like(phi))
    return float(total[0]) if scalar else total


def accidental_channels(rates: SourceRates, phi, detectors: Sequence[str] = ("+0", "+1", "-0")) -> dict[str, np.ndarray]:
    return _triple_channels(rates, np.atleast_1d(np.asarray(phi, dtype=float)), detectors)


# --- source model derived from the optical chain ---------------------------------


def detector_name(label: tuple[str, int]) -> str:
    return f"{label[0]}{label[1]}"


def lo_only_state(config: ChainConfig = ChainConfig()) -> StateVector:
    """The LO photon alone after the chain (before the phase shifter): V through the QWP."""
    state = apply_creation(make_vacuum(HV, config.n_max), "V")
    return apply_mode_transform(state, qwp(math.radians(config.qwp_deg)))


def dc_only_state(config: ChainConfig = ChainConfig()) -> StateVector:
    """The DC pair alone after every interface and the QWP (before the phase shifter)."""
    pair = chain_head(config).intermediates["partial_polarizer"]
    return apply_mode_transform(pair, qwp(math.radians(config.qwp_deg)))


_SHAPE_GRID = np.arange(24) * (2 * math.pi / 24)


def click_fringes(state: StateVector, analyzer: AnalyzerConfig, phase_origin: float) -> tuple[dict[str, Fringe], dict[tuple[str, str], Fringe]]:
    """Per-detector click probability and per-pair joint click probability versus phase."""
    labels = [detector_name(l) for l in analyzer.detector_labels()]
    singles = {d: np.zeros_like(_SHAPE_GRID) for d in labels}
    doubles = {_pair_key(a, b): np.zeros_like(_SHAPE_GRID) for a, b in itertools.combinations(labels, 2)}
    for i, phi in enumerate(_SHAPE_GRID):
        st = apply_mode_transform(state, phase_shift(phi + phase_origin))
        for clicked, p in click_distribution(st, analyzer).items():
            names = sorted(detector_name(c) for c in clicked)
            for d in names:
                singles[d][i] += p
            for a, b in itertools.combinations(names, 2):
                doubles[(a, b)][i] += p
    to_fringe = lambda v: Fringe.from_decomposition(fourier_decompose(_SHAPE_GRID, v, (0, 1, 2, 3, 4)))
    return ({d: to_fringe(v) for d, v in singles.items()}, {k: to_fringe(v) for k, v in doubles.items()})


def _product_fringe(f1: Fringe, f2: Fringe, scale: float) -> Fringe:
    v = f1(_SHAPE_GRID) * f2(_SHAPE_GRID) * scale
    return Fringe.from_decomposition(fourier_decompose(_SHAPE_GRID, v, (0, 1, 2, 3, 4)))


@dataclass(frozen=True)
class SourceModel:
    """Source intensities at the analyzer input, independent of the analyzer layout.

    ``lo_rate``: LO photons/s. ``dc_singles_rate`` and ``dc_doubles_rate``:
    DC single-photon and pair detections/s before the analyzer split.
    ``signal_rate``: post-selected three-photon events/s.
    """

    lo_rate: float
    dc_singles_rate: float
    dc_doubles_rate: float
    signal_rate: float
    pulse_period: float = PULSE_PERIOD_S
    chain: ChainConfig = ChainConfig()

    def rates(self, analyzer: AnalyzerConfig, interval: float = INTERVAL_S) -> SourceRates:
        """Per-detector singles/doubles fringes for this analyzer."""
        origin = self.chain.phase_origin
        lo_s, _ = click_fringes(lo_only_state(self.chain), analyzer, origin)
        dc_s, dc_d = click_fringes(dc_only_state(self.chain), analyzer, origin)
        lo_singles = {d: f.scaled(self.lo_rate) for d, f in lo_s.items()}
        # coherent LO: two photons in one pulse arrive independently
        lo_doubles = {
            _pair_key(a, b): _product_fringe(lo_singles[a], lo_singles[b], self.pulse_period)
            for a, b in itertools.combinations(sorted(lo_singles), 2)
        }
        dc_singles = {d: f.scaled(self.dc_singles_rate) for d, f in dc_s.items()}
        dc_doubles = {p: f.scaled(self.dc_doubles_rate) for p, f in dc_d.items()}
        return SourceRates(
            {LO: SourceFringes(lo_singles, lo_doubles), DC: SourceFringes(dc_singles, dc_doubles)},
            self.pulse_period,
            interval,
        )

    def signal_counts(self, analyzer: AnalyzerConfig, pattern: DetectionPattern, phi, interval: float = INTERVAL_S) -> np.ndarray:
        head = chain_head(self.chain).state
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        probs = np.array([coincidence_rate(head, analyzer, pattern, p + self.chain.phase_origin) for p in phi])
        return probs * self.signal_rate * interval

    def to_dict(self) -> dict:
        return {
            "lo_rate": self.lo_rate,
            "dc_singles_rate": self.dc_singles_rate,
            "dc_doubles_rate": self.dc_doubles_rate,
            "signal_rate": self.signal_rate,
            "pulse_period_s": self.pulse_period,
            "chain": self.chain.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> SourceModel:
        return cls(
            float(data["lo_rate"]), float(data["dc_singles_rate"]), float(data["dc_doubles_rate"]),
            float(data["signal_rate"]), float(data.get("pulse_period_s", PULSE_PERIOD_S)),
            ChainConfig.from_dict(data["chain"]) if "chain" in data else ChainConfig(),
        )


FIG2_ANALYZER = AnalyzerConfig(math.radians(45), 2, 1)
FIG2_PATTERN = DetectionPattern(2, 1)
FIG2_DETECTORS = ("+0", "+1", "-0")


@dataclass(frozen=True)
class OperatingRatios:
    singles_lo_to_dc: float = 10.0
    doubles_dc_to_lo: float = 5.0
    triples_signal_to_accidental: float = 2.0
    accidental_constant: float = 22.0  # counts per interval


def _mean_total(fringes: Mapping) -> float:
    return sum(f.mean for f in fringes.values())


def calibrate_operating_point(
    ratios: OperatingRatios = OperatingRatios(),
    analyzer: AnalyzerConfig = FIG2_ANALYZER,
    pattern: DetectionPattern = FIG2_PATTERN,
    interval: float = INTERVAL_S,
    pulse_period: float = PULSE_PERIOD_S,
    chain: ChainConfig = ChainConfig(),
) -> SourceModel:
    """Choose source intensities that meet the singles/doubles/triples ratios.

    Singles ratio compares LO and DC singles summed over detectors, doubles
    ratio compares DC and LO doubles summed over pairs, and the triples
    ratio compares mean signal and mean accidental triples. The overall
    scale puts the accidental constant component at
    ``ratios.accidental_constant`` counts per interval.
    """
    unit = SourceModel(1.0, 1.0, 1.0, 1.0, pulse_period, chain)
    base = unit.rates(analyzer, interval)
    lo_singles = _mean_total(base.source(LO).singles)  # per unit LO rate
    lo_doubles = _mean_total(base.source(LO).doubles)  # per unit LO rate squared
    dc_singles = _mean_total(base.source(DC).singles)
    dc_doubles = _mean_total(base.source(DC).doubles)

    def model(lo_rate: float) -> SourceModel:
        dc_s = lo_rate * lo_singles / ratios.singles_lo_to_dc / dc_singles
        dc_d = ratios.doubles_dc_to_lo * lo_rate**2 * lo_doubles / dc_doubles
        return SourceModel(lo_rate, dc_s, dc_d, 1.0, pulse_period, chain)

    # every accidental channel is cubic in the LO rate
    trial = model(1.0)
    grid = np.arange(60) * (2 * math.pi / 60)
    acc = accidental_triples(trial.rates(analyzer, interval), grid, _detectors_for(analyzer))
    const = fourier_decompose(grid, acc).amplitude(0)
    lo_rate = (ratios.accidental_constant / const) ** (1 / 3)
    calibrated = model(lo_rate)
    signal_mean = float(np.mean(calibrated.signal_counts(analyzer, pattern, grid, interval)))
    signal_rate = ratios.triples_signal_to_accidental * ratios.accidental_constant / signal_mean
    return SourceModel(lo_rate, calibrated.dc_singles_rate, calibrated.dc_doubles_rate, signal_rate, pulse_period, chain)


def _detectors_for(analyzer: AnalyzerConfig) -> tuple[str, ...]:
    names = tuple(detector_name(l) for l in analyzer.detector_labels())
    if len(names) != 3:
        raise BackgroundError("triple coincidences need exactly three detectors")
    return names


def triple_detectors(analyzer: AnalyzerConfig) -> tuple[str, ...]:
    return _detectors_for(analyzer)


def background_decomposition(
    rates: SourceRates,
    analyzer: AnalyzerConfig = FIG2_ANALYZER,
    n_points: int = 60,
    channels: Sequence[str] = DEFAULT_CHANNELS,
) -> HarmonicDecomposition:
    grid = np.arange(n_points) * (2 * math.pi / n_points)
    return fourier_decompose(grid, accidental_triples(rates, grid, _detectors_for(analyzer), channels))


def per_pulse_enumeration_oracle(event_probabilities: Sequence[float], required: Sequence[int], pulses: float) -> float:
    """Expected count of pulses in which every ``required`` event occurs.

    Enumerates all 2^n joint outcomes of independent per-pulse Bernoulli
    events and sums the probabilities of those containing the required set.
    """
    n = len(event_probabilities)
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=n):
        if all(outcome[i] for i in required):
            p = 1.0
            for hit, q in zip(outcome, event_probabilities):
                p *= q if hit else 1 - q
            total += p
    return total * pulses
