"""Phase scans, Poisson sampling, fitting, and the named presets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .background import (
    DC,
    INTERVAL_S,
    LO,
    SourceModel,
    SourceRates,
    accidental_triples,
    calibrate_operating_point,
    triple_detectors,
)
from .construction import ChainConfig, chain_head
from .detection import AnalyzerConfig, DetectionPattern, coincidence_rate
from .elements import CircuitElement, run_circuit
from .fringes import (
    AliasingError,
    FringeData,
    FringeFit,
    HarmonicDecomposition,
    fit_fringe,
    fourier_decompose,
    subtract_background,
)
from .sampling import sample_counts

BACKGROUND_SYSTEMATIC = 0.05


@dataclass(frozen=True)
class PhaseScan:
    """Uniform grid of ``count`` phases on [start, stop), radians."""

    start: float = 0.0
    stop: float = 2 * math.pi
    count: int = 60
    interval: float = INTERVAL_S
    rng_seed: int | None = None

    def __post_init__(self):
        if self.count < 1:
            raise AliasingError("scan needs at least one point")
        if self.stop <= self.start:
            raise AliasingError("scan stop must exceed start")
        if self.interval <= 0:
            raise ValueError("counting interval must be positive")

    @property
    def phi(self) -> np.ndarray:
        return self.start + (self.stop - self.start) * np.arange(self.count) / self.count

    def check(self, highest_harmonic: int) -> None:
        if self.count < 2 * highest_harmonic + 1:
            raise AliasingError(
                f"{self.count} points alias harmonic {highest_harmonic}; need >= {2 * highest_harmonic + 1}"
            )

    def to_dict(self) -> dict:
        return {
            "start_deg": math.degrees(self.start),
            "stop_deg": math.degrees(self.stop),
            "count": self.count,
            "interval_s": self.interval,
            "seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> PhaseScan:
        seed = data.get("seed")
        return cls(
            math.radians(float(data.get("start_deg", 0.0))),
            math.radians(float(data.get("stop_deg", 360.0))),
            int(data.get("count", 60)),
            float(data.get("interval_s", INTERVAL_S)),
            None if seed is None else int(seed),
        )


def _finish(phi: np.ndarray, mean: np.ndarray, seed: int | None, metadata: dict) -> FringeData:
    if seed is None:
        return FringeData.from_mean(phi, mean, metadata)
    sampled = sample_counts(mean, seed)
    return FringeData(phi, mean, np.sqrt(sampled.astype(float)), sampled, {**metadata, "seed": seed})


def signal_probabilities(
    analyzer: AnalyzerConfig,
    pattern: DetectionPattern,
    phi: np.ndarray,
    chain: ChainConfig = ChainConfig(),
    circuit: Sequence[CircuitElement] | None = None,
) -> np.ndarray:
    """Coincidence probability of the constructed state at each phase.

    Without ``circuit`` the full chain is used. With one, the circuit acts on
    the state right after the LO injection and its scanned parameter
    receives ``phi + chain.phase_origin``.
    """
    head = chain_head(chain)
    if circuit is None:
        return np.array([coincidence_rate(head.state, analyzer, pattern, p + chain.phase_origin) for p in phi])
    start = head.intermediates["lo_injection"]
    return np.array(
        [coincidence_rate(run_circuit(start, circuit, p + chain.phase_origin).state, analyzer, pattern) for p in phi]
    )


def scan(
    chain: ChainConfig,
    analyzer: AnalyzerConfig,
    pattern: DetectionPattern,
    phase_scan: PhaseScan,
    background: SourceRates | None = None,
    scale: float | None = None,
    circuit: Sequence[CircuitElement] | None = None,
) -> FringeData:
    """Expected (and optionally Poisson-sampled) coincidence counts per interval.

    ``scale`` is the number of post-selected events per counting interval;
    by default it comes from the calibrated operating point.
    """
    phase_scan.check(pattern.total)
    phi = phase_scan.phi
    if scale is None:
        scale = default_model().signal_rate * phase_scan.interval
    mean = signal_probabilities(analyzer, pattern, phi, chain, circuit) * scale
    meta: dict = {
        "kind": "coincidence",
        "analyzer": analyzer.to_dict(),
        "pattern": list(pattern.as_tuple()),
        "interval_s": phase_scan.interval,
        "scale": scale,
    }
    if background is not None:
        if pattern.total != 3:
            raise ValueError("accidental background is modeled for three-fold coincidences only")
        rates = background.with_interval(phase_scan.interval)
        mean = mean + accidental_triples(rates, phi, triple_detectors(analyzer))
        meta["background"] = True
    return _finish(phi, mean, phase_scan.rng_seed, meta)


def background_series(rates: SourceRates, analyzer: AnalyzerConfig, phase_scan: PhaseScan,
                      systematic: float = BACKGROUND_SYSTEMATIC) -> FringeData:
    """Model accidental triples with a relative systematic uncertainty."""
    mean = accidental_triples(rates.with_interval(phase_scan.interval), phase_scan.phi, triple_detectors(analyzer))
    return FringeData(phase_scan.phi, mean, systematic * np.abs(mean), None,
                      {"kind": "accidental_background", "interval_s": phase_scan.interval})


def singles_counts(rates: SourceRates, detector: str, phi: np.ndarray) -> np.ndarray:
    return sum(rates.source(s).single(detector)(phi) for s in (LO, DC)) * rates.counting_interval


def doubles_counts(rates: SourceRates, d1: str, d2: str, phi: np.ndarray) -> np.ndarray:
    """Source doubles plus accidental LO-single x DC-single pairs, per interval."""
    lo, dc = rates.source(LO), rates.source(DC)
    total = lo.double(d1, d2)(phi) + dc.double(d1, d2)(phi)
    tau = rates.pulse_period
    total = total + tau * (lo.single(d1)(phi) * dc.single(d2)(phi) + dc.single(d1)(phi) * lo.single(d2)(phi))
    return total * rates.counting_interval


# --- presets ------------------------------------------------------------------


@dataclass(frozen=True)
class Preset:
    name: str
    kind: str  # singles | doubles | triples
    analyzer: AnalyzerConfig
    detectors: tuple[str, ...]
    harmonic: int
    interval: float = INTERVAL_S
    pattern: DetectionPattern | None = None
    subtract: bool = False
    description: str = ""


FIG2 = AnalyzerConfig(math.radians(45), 2, 1)
FIG3 = AnalyzerConfig(math.radians(45), 3, 0)

PRESETS: dict[str, Preset] = {
    p.name: p
    for p in (
        Preset("fig2a", "singles", FIG2, ("-0",), 1, description="singles at -45 deg"),
        Preset("fig2b", "doubles", FIG2, ("+0", "-0"), 2, pattern=DetectionPattern(1, 1),
               description="two-fold |1,1> coincidences"),
        Preset("fig2c", "triples", FIG2, ("+0", "+1", "-0"), 3, pattern=DetectionPattern(2, 1),
               description="three-fold |2,1> coincidences"),
        Preset("fig2d", "triples", FIG2, ("+0", "+1", "-0"), 3, pattern=DetectionPattern(2, 1), subtract=True,
               description="three-fold |2,1> coincidences after background subtraction"),
        Preset("fig3a", "singles", FIG3, ("+0",), 1, interval=300.0, description="singles at +45 deg"),
        Preset("fig3b", "triples", FIG3, ("+0", "+1", "+2"), 3, interval=300.0, pattern=DetectionPattern(3, 0),
               subtract=True, description="three-fold |3,0> coincidences after background subtraction"),
    )
}

DEFAULT_SEED = 2004


@lru_cache(maxsize=1)
def default_model() -> SourceModel:
    return calibrate_operating_point()


@dataclass(frozen=True)
class ReproductionBundle:
    preset: str
    data: FringeData
    fit: FringeFit
    decomposition: HarmonicDecomposition
    background: FringeData | None = None
    background_decomposition: HarmonicDecomposition | None = None
    raw: FringeData | None = None
    raw_fit: FringeFit | None = None
    metadata: Mapping = field(default_factory=dict)

    def files(self) -> dict[str, str]:
        """File name -> text content, deterministic for fixed inputs."""
        out = {
            "metadata.json": _dumps(self.metadata),
            "data.csv": self.data.to_csv(),
            "fit.json": _dumps(self.fit.to_dict()),
            "decomposition.json": _dumps(self.decomposition.to_dict()),
        }
        if self.raw is not None:
            out["raw.csv"] = self.raw.to_csv()
            out["raw_fit.json"] = _dumps(self.raw_fit.to_dict())
        if self.background is not None:
            out["background.csv"] = self.background.to_csv()
            out["background_decomposition.json"] = _dumps(self.background_decomposition.to_dict())
        return out

    def write(self, out_dir: str | Path) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files().items():
            path = out_dir / name
            path.write_text(text)
            written.append(path)
        return written

    @classmethod
    def read(cls, out_dir: str | Path) -> ReproductionBundle:
        out_dir = Path(out_dir)
        meta = json.loads((out_dir / "metadata.json").read_text())
        opt = lambda name: (out_dir / name).read_text() if (out_dir / name).exists() else None
        raw, bg = opt("raw.csv"), opt("background.csv")
        return cls(
            meta["preset"],
            FringeData.from_csv((out_dir / "data.csv").read_text()),
            FringeFit.from_dict(json.loads((out_dir / "fit.json").read_text())),
            HarmonicDecomposition.from_dict(json.loads((out_dir / "decomposition.json").read_text())),
            FringeData.from_csv(bg) if bg else None,
            HarmonicDecomposition.from_dict(json.loads(opt("background_decomposition.json"))) if bg else None,
            FringeData.from_csv(raw) if raw else None,
            FringeFit.from_dict(json.loads(opt("raw_fit.json"))) if raw else None,
            meta,
        )


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def reproduce(
    preset: str,
    seed: int | None = DEFAULT_SEED,
    model: SourceModel | None = None,
    count: int = 60,
) -> ReproductionBundle:
    """Simulate one preset panel: sample, subtract the modeled background if the preset asks, fit."""
    if preset not in PRESETS:
        raise KeyError(f"unknown preset {preset!r}; valid presets: {', '.join(PRESETS)}")
    p = PRESETS[preset]
    model = default_model() if model is None else model
    rates = model.rates(p.analyzer, p.interval)
    phase_scan = PhaseScan(count=count, interval=p.interval, rng_seed=seed)
    phase_scan.check(p.harmonic)
    phi = phase_scan.phi
    meta = {
        "preset": p.name,
        "description": p.description,
        "kind": p.kind,
        "analyzer": p.analyzer.to_dict(),
        "detectors": list(p.detectors),
        "interval_s": p.interval,
        "points": count,
        "seed": seed,
        "fit_harmonic": p.harmonic,
        "source_model": model.to_dict(),
    }
    if p.pattern is not None:
        meta["pattern"] = list(p.pattern.as_tuple())

    if p.kind == "singles":
        data = _finish(phi, singles_counts(rates, p.detectors[0], phi), seed, {"kind": "singles"})
        return ReproductionBundle(preset, data, fit_fringe(data, p.harmonic),
                                  fourier_decompose(phi, data.counts), metadata=meta)
    if p.kind == "doubles":
        data = _finish(phi, doubles_counts(rates, *p.detectors, phi), seed, {"kind": "doubles"})
        return ReproductionBundle(preset, data, fit_fringe(data, p.harmonic),
                                  fourier_decompose(phi, data.counts), metadata=meta)

    signal = model.signal_counts(p.analyzer, p.pattern, phi, p.interval)
    bg = background_series(rates, p.analyzer, phase_scan)
    total = _finish(phi, signal + bg.mean, seed, {"kind": "triples"})
    bg_dec = fourier_decompose(phi, bg.mean)
    meta["signal_mean"] = float(np.mean(signal))
    meta["background_mean"] = float(np.mean(bg.mean))
    if not p.subtract:
        return ReproductionBundle(preset, total, fit_fringe(total, p.harmonic), fourier_decompose(phi, total.counts),
                                  bg, bg_dec, metadata=meta)
    sub = subtract_background(total, bg)
    return ReproductionBundle(preset, sub, fit_fringe(sub, p.harmonic), fourier_decompose(phi, sub.counts),
                              bg, bg_dec, total, fit_fringe(total, p.harmonic), meta)


def ideal_three_photon_scan(phase_scan: PhaseScan, scale: float = 1.0) -> FringeData:
    """The background-free |2,1> coincidence fringe of the constructed state."""
    return scan(ChainConfig(), FIG2, DetectionPattern(2, 1), phase_scan, scale=scale)


def with_seed(phase_scan: PhaseScan, seed: int | None) -> PhaseScan:
    return replace(phase_scan, rng_seed=seed)
