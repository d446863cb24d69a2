"""Polarization-resolved detection with non-number-resolving detectors.

Each analyzer output port (``+`` at ``basis_angle`` from vertical, ``-`` at
``basis_angle - 90 deg``) fans out uniformly to ``k`` detectors. A pattern
``(n_plus, n_minus)`` is registered as an ``n_plus + n_minus``-fold
coincidence only when every photon lands on a distinct detector.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .elements import ModeTransform, apply_mode_transform, phase_shift
from .fock import (
    ModeSet,
    StateVector,
    expectation_A_N,
    expectation_A_N_squared,
    noon_state,
)


class DetectionError(ValueError):
    pass


class StationaryPointError(DetectionError):
    """Phase sensitivity is undefined where d<A_N>/dphi vanishes."""


@dataclass(frozen=True)
class AnalyzerConfig:
    basis_angle: float = math.radians(45)
    detectors_plus: int = 2
    detectors_minus: int = 1
    efficiency: float = 1.0

    def __post_init__(self):
        if self.detectors_plus < 0 or self.detectors_minus < 0:
            raise DetectionError("detector counts must be non-negative")
        if self.detectors_plus + self.detectors_minus < 1:
            raise DetectionError("analyzer needs at least one detector")
        if not 0 <= self.efficiency <= 1:
            raise DetectionError("detector efficiency must lie in [0, 1]")

    @property
    def detectors(self) -> tuple[int, int]:
        return (self.detectors_plus, self.detectors_minus)

    def detector_labels(self) -> list[tuple[str, int]]:
        return [("+", i) for i in range(self.detectors_plus)] + [("-", i) for i in range(self.detectors_minus)]

    def rotated(self, alpha: float) -> AnalyzerConfig:
        return AnalyzerConfig(self.basis_angle + alpha, self.detectors_plus, self.detectors_minus, self.efficiency)

    def to_dict(self) -> dict:
        out = {"basis_deg": math.degrees(self.basis_angle), "detectors": list(self.detectors)}
        if self.efficiency != 1.0:
            out["efficiency"] = self.efficiency
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> AnalyzerConfig:
        k_plus, k_minus = data.get("detectors", (2, 1))
        return cls(math.radians(float(data.get("basis_deg", 45.0))), int(k_plus), int(k_minus),
                   float(data.get("efficiency", 1.0)))


@dataclass(frozen=True)
class DetectionPattern:
    n_plus: int
    n_minus: int

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0:
            raise DetectionError("pattern counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n_plus + self.n_minus

    def as_tuple(self) -> tuple[int, int]:
        return (self.n_plus, self.n_minus)


def analyzer_transform(basis_angle: float) -> ModeTransform:
    """(H, V) -> (+, -) change of basis; rows are the analyzer port vectors."""
    s, c = math.sin(basis_angle), math.cos(basis_angle)
    return ModeTransform(np.array([[s, c], [-c, s]]), f"analyzer({math.degrees(basis_angle):g})")


def in_analyzer_basis(state: StateVector, analyzer: AnalyzerConfig) -> StateVector:
    out = apply_mode_transform(state, analyzer_transform(analyzer.basis_angle))
    return StateVector(ModeSet(("+", "-")), out.amplitudes, out.n_max)


def _check_normalized(state: StateVector) -> None:
    if abs(state.norm_squared() - 1) > 1e-9:
        raise DetectionError(f"state must be normalized (norm^2={state.norm_squared():.6g})")


def pattern_probability(state: StateVector, analyzer: AnalyzerConfig, pattern: DetectionPattern) -> float:
    _check_normalized(state)
    if pattern.total not in state.photon_numbers():
        raise DetectionError(
            f"pattern carries {pattern.total} photons, state has {sorted(state.photon_numbers())}"
        )
    return abs(in_analyzer_basis(state, analyzer).amplitude(pattern.as_tuple())) ** 2


def pattern_distribution(state: StateVector, analyzer: AnalyzerConfig) -> dict[tuple[int, int], float]:
    _check_normalized(state)
    rot = in_analyzer_basis(state, analyzer)
    return {occ: abs(a) ** 2 for occ, a in rot}


def fanout_distinct_probability(n: int, k: int) -> float:
    """Chance that n photons routed uniformly over k detectors all hit different ones."""
    if n < 0 or k < 1:
        raise DetectionError("need n >= 0 and k >= 1")
    if n > k:
        return 0.0
    return math.perm(k, n) / k**n


def coincidence_rate(
    state: StateVector,
    analyzer: AnalyzerConfig,
    pattern: DetectionPattern,
    phi: float | None = None,
) -> float:
    """Probability per event of the pattern's distinct-detector coincidence.

    When ``phi`` is given the birefringent phase shift is applied first.
    """
    if phi is not None:
        state = apply_mode_transform(state, phase_shift(phi))
    p = pattern_probability(state, analyzer, pattern)
    p *= fanout_distinct_probability(pattern.n_plus, analyzer.detectors_plus) if pattern.n_plus else 1.0
    p *= fanout_distinct_probability(pattern.n_minus, analyzer.detectors_minus) if pattern.n_minus else 1.0
    return p * analyzer.efficiency**pattern.total


@lru_cache(maxsize=None)
def _routing_distribution(n: int, k: int) -> tuple[tuple[frozenset[int], float], ...]:
    """Distribution of the set of clicked detectors for n photons over k detectors."""
    if n == 0:
        return ((frozenset(), 1.0),)
    if k == 0:
        return ()  # photons on a port with no detector are never seen
    counts: Counter = Counter(frozenset(r) for r in itertools.product(range(k), repeat=n))
    total = k**n
    return tuple((s, c / total) for s, c in sorted(counts.items(), key=lambda x: sorted(x[0])))


def click_distribution(state: StateVector, analyzer: AnalyzerConfig) -> dict[frozenset, float]:
    """Probability of each set of clicked detectors (labels as in ``detector_labels``).

    Efficiency enters as a factor efficiency**|set| on each event's rate;
    it does not redistribute probability between sets.
    """
    out: dict[frozenset, float] = {}
    for (n_p, n_m), p in pattern_distribution(state, analyzer).items():
        for s_p, q_p in _routing_distribution(n_p, analyzer.detectors_plus):
            for s_m, q_m in _routing_distribution(n_m, analyzer.detectors_minus):
                key = frozenset({("+", i) for i in s_p} | {("-", i) for i in s_m})
                out[key] = out.get(key, 0.0) + p * q_p * q_m * analyzer.efficiency ** len(key)
    return out


def detector_event_probability(state: StateVector, analyzer: AnalyzerConfig, detectors: Sequence[tuple[str, int]]) -> float:
    """Probability that (at least) every listed detector clicks."""
    need = set(detectors)
    return sum(p for s, p in click_distribution(state, analyzer).items() if need <= s)


# --- super-resolution and sensitivity ------------------------------------------


def _a_n_element(bra: StateVector, ket: StateVector, n: int) -> complex:
    return (
        bra.amplitude((n, 0)).conjugate() * ket.amplitude((0, n))
        + bra.amplitude((0, n)).conjugate() * ket.amplitude((n, 0))
    )


def expectation_A_N_derivative(state: StateVector, n: int) -> float:
    """d<A_N>/dphi for the state evolving under the V-mode phase shift."""
    # generator of phase_shift is the V photon number: d psi/dphi = i n_V psi
    deriv = StateVector(state.modes, {o: 1j * o[1] * a for o, a in state.amplitudes.items()}, state.n_max)
    return 2 * _a_n_element(state, deriv, n).real


def phase_sensitivity(n: int, phi: float, tol: float = 1e-9) -> float:
    """Error-propagation phase uncertainty Delta A_N / |d<A_N>/dphi| on the NOON state."""
    if n < 1:
        raise DetectionError("N must be >= 1")
    state = apply_mode_transform(noon_state(n), phase_shift(phi))
    mean = expectation_A_N(state, n)
    var = max(expectation_A_N_squared(state, n) - mean**2, 0.0)
    slope = expectation_A_N_derivative(state, n)
    if abs(slope) < tol * n:
        raise StationaryPointError(f"d<A_{n}>/dphi vanishes at phi={phi}")
    return math.sqrt(var) / abs(slope)


# --- distinguishable-photon model -------------------------------------------------


@dataclass(frozen=True)
class ClassicalPhotonSet:
    """Independent single photons, one normalized (H, V) Jones vector each."""

    jones: tuple[tuple[complex, complex], ...]

    def __post_init__(self):
        normed = []
        for v in self.jones:
            v = np.asarray(v, dtype=complex)
            n = np.linalg.norm(v)
            if abs(n - 1) > 1e-9:
                raise DetectionError(f"Jones vector {v} is not normalized")
            normed.append((complex(v[0]), complex(v[1])))
        object.__setattr__(self, "jones", tuple(normed))

    def __len__(self):
        return len(self.jones)

    @classmethod
    def linear(cls, angles: Sequence[float]) -> ClassicalPhotonSet:
        return cls(tuple((math.sin(t), math.cos(t)) for t in angles))

    @classmethod
    def elliptical(cls, mix: Sequence[float], phases: Sequence[float]) -> ClassicalPhotonSet:
        """Photon k is cos(mix_k)|H> + sin(mix_k) e^{i phases_k}|V>."""
        return cls(tuple((math.cos(a), math.sin(a) * np.exp(1j * b)) for a, b in zip(mix, phases)))

    def rotated(self, alpha: float) -> ClassicalPhotonSet:
        c, s = math.cos(alpha), math.sin(alpha)
        r = np.array([[c, s], [-s, c]])
        return ClassicalPhotonSet(tuple(tuple(r @ np.asarray(v)) for v in self.jones))


def single_photon_port_probabilities(jones: Sequence[complex], phi: np.ndarray | float, analyzer: AnalyzerConfig) -> np.ndarray:
    """(p_plus, p_minus) for one photon after the phase shift; vectorized over phi."""
    phi = np.asarray(phi, dtype=float)
    h = jones[0] * np.ones_like(phi)
    v = jones[1] * np.exp(1j * phi)
    s, c = math.sin(analyzer.basis_angle), math.cos(analyzer.basis_angle)
    return np.stack([np.abs(s * h + c * v) ** 2, np.abs(-c * h + s * v) ** 2])


def distinguishable_triple_rate(
    photons: ClassicalPhotonSet,
    phi: np.ndarray | float,
    analyzer: AnalyzerConfig,
    pattern: DetectionPattern,
) -> np.ndarray:
    """Coincidence rate for independent photons, summed over port assignments."""
    if len(photons) != pattern.total:
        raise DetectionError("pattern total must equal the number of photons")
    probs = [single_photon_port_probabilities(j, phi, analyzer) for j in photons.jones]
    total = np.zeros_like(np.asarray(phi, dtype=float))
    for minus in itertools.combinations(range(len(photons)), pattern.n_minus):
        term = np.ones_like(total)
        for k, p in enumerate(probs):
            term = term * p[1 if k in minus else 0]
        total = total + term
    fan = 1.0
    if pattern.n_plus:
        fan *= fanout_distinct_probability(pattern.n_plus, analyzer.detectors_plus)
    if pattern.n_minus:
        fan *= fanout_distinct_probability(pattern.n_minus, analyzer.detectors_minus)
    return total * fan * analyzer.efficiency**pattern.total


_HARMONIC_GRID = np.arange(16) * (2 * math.pi / 16)


def harmonic_coefficients(values: np.ndarray) -> np.ndarray:
    """Complex Fourier coefficients c_k (k = 0..3) of a trig polynomial sampled on _HARMONIC_GRID.

    values(phi) = c_0 + sum_k |2 c_k| cos(k phi + arg c_k).
    """
    return np.fft.rfft(values)[:4] / len(values)


def _port_fringe_coefficients(jones: Sequence[complex], analyzer: AnalyzerConfig) -> np.ndarray:
    """Rows (+, -): coefficients of e^{-i phi}, 1, e^{i phi} in the port probability."""
    s, c = math.sin(analyzer.basis_angle), math.cos(analyzer.basis_angle)
    h, v = jones
    out = np.empty((2, 3), dtype=complex)
    for row, (ph, pv) in enumerate(((s, c), (-c, s))):
        # |ph h + pv v e^{i phi}|^2
        beta = ph * pv * np.conj(h) * v
        out[row] = (np.conj(beta), ph**2 * abs(h) ** 2 + pv**2 * abs(v) ** 2, beta)
    return out


def distinguishable_fringe_coefficients(
    photons: ClassicalPhotonSet, analyzer: AnalyzerConfig, pattern: DetectionPattern
) -> np.ndarray:
    """Exact Fourier coefficients c_0..c_n of ``distinguishable_triple_rate``."""
    if len(photons) != pattern.total:
        raise DetectionError("pattern total must equal the number of photons")
    ports = [_port_fringe_coefficients(j, analyzer) for j in photons.jones]
    n = len(photons)
    total = np.zeros(2 * n + 1, dtype=complex)
    for minus in itertools.combinations(range(n), pattern.n_minus):
        term = np.array([1.0 + 0j])
        for k, p in enumerate(ports):
            term = np.convolve(term, p[1 if k in minus else 0])
        total += term
    fan = 1.0
    if pattern.n_plus:
        fan *= fanout_distinct_probability(pattern.n_plus, analyzer.detectors_plus)
    if pattern.n_minus:
        fan *= fanout_distinct_probability(pattern.n_minus, analyzer.detectors_minus)
    return total[n:] * fan * analyzer.efficiency**pattern.total


def three_phi_visibility(values: np.ndarray) -> tuple[float, float, float]:
    """(3phi visibility, relative 1phi amplitude, relative 2phi amplitude) from grid samples."""
    return _visibility_from_coefficients(harmonic_coefficients(values))


def _visibility_from_coefficients(c: np.ndarray) -> tuple[float, float, float]:
    base = c[0].real
    if base <= 0:
        return 0.0, 0.0, 0.0
    return 2 * abs(c[3]) / base, 2 * abs(c[1]) / base, 2 * abs(c[2]) / base


def quantum_three_phi_visibility(state: StateVector, analyzer: AnalyzerConfig, pattern: DetectionPattern) -> float:
    """3phi visibility of the coincidence fringe of a (pre-phase) quantum state."""
    vals = np.array([coincidence_rate(state, analyzer, pattern, p) for p in _HARMONIC_GRID])
    return three_phi_visibility(vals)[0]


@dataclass(frozen=True)
class VisibilityBound:
    visibility: float
    photons: ClassicalPhotonSet
    residual_1phi: float
    residual_2phi: float


def _photon_params(x: np.ndarray) -> ClassicalPhotonSet:
    return ClassicalPhotonSet.elliptical(x[:3], x[3:])


def measure_visibility_bound_distinguishable(
    analyzer: AnalyzerConfig = AnalyzerConfig(),
    pattern: DetectionPattern = DetectionPattern(2, 1),
    mix_grid: Sequence[float] = (math.pi / 6, math.pi / 4),
    phase_step: float = math.radians(45),
    constraint_tol: float = 1e-7,
) -> VisibilityBound:
    """Largest 3phi visibility of three distinguishable photons whose fringe is purely 3phi.

    Only photon sets whose coincidence fringe has no 1phi or 2phi content are
    admissible (an oscillation "at 3phi"). Each photon is an arbitrary
    elliptical polarization. A deterministic grid of starting points is
    refined by SLSQP with the vanishing-harmonic conditions as equality
    constraints; the best admissible optimum is returned. Fan-out factors
    are common to every term and cancel in the visibility.
    """

    def coeffs(x):
        return distinguishable_fringe_coefficients(_photon_params(x), analyzer, pattern)

    def objective(x):
        c = coeffs(x)
        return -abs(c[3]) / c[0].real if c[0].real > 0 else 0.0

    def constraint(x):
        c = coeffs(x)
        c = c / max(c[0].real, 1e-300)
        return np.array([c[1].real, c[1].imag, c[2].real, c[2].imag])

    phases = np.arange(0, 2 * math.pi, phase_step)
    best: VisibilityBound | None = None
    for mix in itertools.product(mix_grid, repeat=3):
        for b2, b3 in itertools.product(phases, phases):
            x0 = np.array([*mix, 0.0, b2, b3])
            res = minimize(
                objective,
                x0,
                method="SLSQP",
                constraints=[{"type": "eq", "fun": constraint}],
                bounds=[(0, math.pi / 2)] * 3 + [(None, None)] * 3,
                options={"ftol": 1e-14, "maxiter": 300},
            )
            vis, r1, r2 = _visibility_from_coefficients(coeffs(res.x))
            if r1 > constraint_tol or r2 > constraint_tol:
                continue
            if best is None or vis > best.visibility:
                best = VisibilityBound(vis, _photon_params(res.x), r1, r2)
    if best is None:
        raise DetectionError("no admissible photon set found")
    return best
