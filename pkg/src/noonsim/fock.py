"""Few-photon bosonic states over labeled modes.

States are stored sparsely as a map from occupation tuples to complex
amplitudes. All operations return new values; a ``StateVector`` is never
mutated after construction.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_N_MAX = 6
PRUNE_THRESHOLD = 1e-14
ATOL = 1e-12

Occupation = tuple[int, ...]


class FockError(ValueError):
    """Raised for invalid state construction or manipulation."""


class PhotonOverflowError(FockError):
    """An operation would put more photons in a state than its cap allows."""


@dataclass(frozen=True)
class ModeLabel:
    name: str
    index: int


class ModeSet(tuple):
    """Ordered, duplicate-free tuple of mode names."""

    def __new__(cls, names: Iterable[str]):
        names = tuple(str(n) for n in names)
        if not names:
            raise FockError("mode set must be non-empty")
        if len(set(names)) != len(names):
            raise FockError(f"duplicate mode labels in {names}")
        return super().__new__(cls, names)

    def label(self, mode: str | int | ModeLabel) -> ModeLabel:
        return ModeLabel(self[self.index_of(mode)], self.index_of(mode))

    def index_of(self, mode: str | int | ModeLabel) -> int:
        if isinstance(mode, ModeLabel):
            mode = mode.name
        if isinstance(mode, (int, np.integer)):
            if not 0 <= mode < len(self):
                raise FockError(f"mode index {mode} out of range")
            return int(mode)
        try:
            return self.index(mode)
        except ValueError:
            raise FockError(f"unknown mode {mode!r}; have {tuple(self)}") from None


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes over occupation states of ``modes``.

    ``amplitudes`` maps occupation tuples to complex numbers. Every stored
    occupation has length ``len(modes)`` and total photon number at most
    ``n_max``.
    """

    modes: ModeSet
    amplitudes: Mapping[Occupation, complex]
    n_max: int = DEFAULT_N_MAX
    _sorted: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        modes = self.modes if isinstance(self.modes, ModeSet) else ModeSet(self.modes)
        object.__setattr__(self, "modes", modes)
        if self.n_max < 0:
            raise FockError("n_max must be non-negative")
        clean: dict[Occupation, complex] = {}
        for occ, amp in self.amplitudes.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != len(modes):
                raise FockError(f"occupation {occ} does not match {len(modes)} modes")
            if any(n < 0 for n in occ):
                raise FockError(f"negative occupation {occ}")
            if sum(occ) > self.n_max:
                raise PhotonOverflowError(f"occupation {occ} exceeds n_max={self.n_max}")
            clean[occ] = clean.get(occ, 0j) + complex(amp)
        object.__setattr__(self, "amplitudes", clean)
        object.__setattr__(self, "_sorted", tuple(sorted(clean.items())))

    def __iter__(self):
        return iter(self._sorted)

    def __len__(self):
        return len(self._sorted)

    def amplitude(self, occ: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(occ), 0j)

    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def norm(self) -> float:
        return math.sqrt(self.norm_squared())

    def normalized(self) -> StateVector:
        nrm = self.norm()
        if nrm == 0:
            raise FockError("cannot normalize a zero-norm state")
        return self.scaled(1 / nrm)

    def scaled(self, factor: complex) -> StateVector:
        return StateVector(self.modes, {o: a * factor for o, a in self.amplitudes.items()}, self.n_max)

    def pruned(self, threshold: float = PRUNE_THRESHOLD) -> StateVector:
        return StateVector(
            self.modes, {o: a for o, a in self.amplitudes.items() if abs(a) >= threshold}, self.n_max
        )

    def photon_numbers(self) -> set[int]:
        return {sum(o) for o in self.amplitudes}

    def photon_number(self) -> int:
        """Total photon number of a number-definite state."""
        numbers = self.photon_numbers()
        if len(numbers) != 1:
            raise FockError(f"state has no definite photon number: {sorted(numbers)}")
        return numbers.pop()

    def __add__(self, other: StateVector) -> StateVector:
        _check_same_modes(self, other)
        amps = dict(self.amplitudes)
        for occ, a in other.amplitudes.items():
            amps[occ] = amps.get(occ, 0j) + a
        return StateVector(self.modes, amps, max(self.n_max, other.n_max))

    def __sub__(self, other: StateVector) -> StateVector:
        return self + other.scaled(-1)

    def with_modes(self, extra: Sequence[str]) -> StateVector:
        """Append empty modes to the mode set."""
        modes = ModeSet(tuple(self.modes) + tuple(extra))
        pad = (0,) * len(extra)
        return StateVector(modes, {o + pad: a for o, a in self.amplitudes.items()}, self.n_max)

    def to_dict(self) -> dict:
        return {
            "modes": list(self.modes),
            "n_max": self.n_max,
            "amplitudes": [
                {"occ": list(occ), "re": float(a.real), "im": float(a.imag)} for occ, a in self._sorted
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> StateVector:
        amps = {tuple(rec["occ"]): complex(rec["re"], rec["im"]) for rec in data["amplitudes"]}
        return cls(ModeSet(data["modes"]), amps, int(data["n_max"]))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> StateVector:
        return cls.from_dict(json.loads(text))


def _check_same_modes(s1: StateVector, s2: StateVector) -> None:
    if tuple(s1.modes) != tuple(s2.modes):
        raise FockError(f"mode-set mismatch: {tuple(s1.modes)} vs {tuple(s2.modes)}")


def make_vacuum(modes: Iterable[str], n_max: int = DEFAULT_N_MAX) -> StateVector:
    modes = ModeSet(modes)
    return StateVector(modes, {(0,) * len(modes): 1.0}, n_max)


def basis_state(modes: Iterable[str], occ: Sequence[int], n_max: int = DEFAULT_N_MAX) -> StateVector:
    modes = ModeSet(modes)
    return StateVector(modes, {tuple(occ): 1.0}, n_max)


def apply_creation(state: StateVector, mode: str | int | ModeLabel) -> StateVector:
    """Apply a†_mode; amplitude on |..n..> moves to |..n+1..> times sqrt(n+1)."""
    i = state.modes.index_of(mode)
    out: dict[Occupation, complex] = {}
    for occ, amp in state.amplitudes.items():
        if sum(occ) + 1 > state.n_max:
            raise PhotonOverflowError(f"creation on {occ} exceeds n_max={state.n_max}")
        new = occ[:i] + (occ[i] + 1,) + occ[i + 1 :]
        out[new] = out.get(new, 0j) + amp * math.sqrt(occ[i] + 1)
    return StateVector(state.modes, out, state.n_max)


def apply_creation_combination(state: StateVector, coeffs: Mapping[str, complex]) -> StateVector:
    """Apply sum_m c_m a†_m for a single photon in a superposition of modes."""
    total = None
    for mode, c in coeffs.items():
        if c == 0:
            continue
        term = apply_creation(state, mode).scaled(c)
        total = term if total is None else total + term
    if total is None:
        return StateVector(state.modes, {}, state.n_max)
    return total


def inner_product(s1: StateVector, s2: StateVector) -> complex:
    """<s1|s2>, conjugate-linear in ``s1``."""
    _check_same_modes(s1, s2)
    small = s1 if len(s1) <= len(s2) else s2
    acc = 0j
    for occ in small.amplitudes:
        acc += s1.amplitude(occ).conjugate() * s2.amplitude(occ)
    return complex(acc)


def fidelity_up_to_global_phase(s1: StateVector, s2: StateVector) -> float:
    n1, n2 = s1.norm_squared(), s2.norm_squared()
    if n1 == 0 or n2 == 0:
        raise FockError("fidelity undefined for a zero-norm state")
    return float(abs(inner_product(s1, s2)) ** 2 / (n1 * n2))


def _two_mode_noon_amplitudes(state: StateVector, n: int) -> tuple[complex, complex]:
    if len(state.modes) != 2:
        raise FockError("A_N expectation needs a two-mode state")
    if abs(state.norm_squared() - 1) > 1e-9:
        raise FockError(f"state not normalized (norm^2={state.norm_squared():.3g})")
    return state.amplitude((n, 0)), state.amplitude((0, n))


def expectation_A_N(state: StateVector, n: int) -> float:
    """<A_N> with A_N = |0,N><N,0| + |N,0><0,N|."""
    a, b = _two_mode_noon_amplitudes(state, n)
    return 2 * (a.conjugate() * b).real


def expectation_A_N_squared(state: StateVector, n: int) -> float:
    # A_N^2 is the projector onto span{|N,0>, |0,N>}
    a, b = _two_mode_noon_amplitudes(state, n)
    return abs(a) ** 2 + abs(b) ** 2


def expectation_A_N_complex(state: StateVector, n: int) -> complex:
    """Unsymmetrized conj(a)b + conj(b)a; its imaginary part is roundoff only."""
    a, b = _two_mode_noon_amplitudes(state, n)
    return a.conjugate() * b + b.conjugate() * a


def noon_state(n: int, relative_phase: float = 0.0, modes=("H", "V"), n_max: int | None = None) -> StateVector:
    """(|N,0> + exp(i*relative_phase)|0,N>)/sqrt(2) written directly in the Fock basis."""
    if n < 1:
        raise FockError("NOON state needs N >= 1")
    n_max = max(n, DEFAULT_N_MAX) if n_max is None else n_max
    if n > n_max:
        raise PhotonOverflowError(f"N={n} exceeds n_max={n_max}")
    s = 1 / math.sqrt(2)
    return StateVector(ModeSet(modes), {(n, 0): s, (0, n): s * np.exp(1j * relative_phase)}, n_max)


def occupations(n_modes: int, n_photons: int) -> list[Occupation]:
    """All occupation tuples with the given total, in lexicographic order."""
    if n_modes == 1:
        return [(n_photons,)]
    out = []
    for first in range(n_photons + 1):
        for rest in occupations(n_modes - 1, n_photons - first):
            out.append((first,) + rest)
    return sorted(out)


# --- permanent-based oracle -------------------------------------------------


def permanent(m: np.ndarray) -> complex:
    """Permanent via Ryser's formula with inclusion-exclusion over column subsets."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if m.shape != (n, n):
        raise FockError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0j
    total = 0j
    for r in range(1, n + 1):
        sign = (-1) ** r
        for cols in itertools.combinations(range(n), r):
            total += sign * np.prod(m[:, cols].sum(axis=1))
    return complex((-1) ** n * total)


def fock_amplitude_oracle(matrix: np.ndarray, occ_in: Sequence[int], occ_out: Sequence[int]) -> complex:
    """<out| U(M) |in> from the permanent of a row/column-repeated submatrix.

    ``matrix[j, i]`` is the coefficient of a†_j in the image of a†_i.
    Transitions that change photon number have amplitude 0.
    """
    m = np.asarray(matrix, dtype=complex)
    occ_in, occ_out = tuple(occ_in), tuple(occ_out)
    if len(occ_in) != m.shape[1] or len(occ_out) != m.shape[0]:
        raise FockError("occupation lengths do not match matrix dimensions")
    if sum(occ_in) != sum(occ_out):
        return 0j
    cols = [i for i, n in enumerate(occ_in) for _ in range(n)]
    rows = [j for j, n in enumerate(occ_out) for _ in range(n)]
    sub = m[np.ix_(rows, cols)]
    norm = math.prod(math.factorial(n) for n in occ_in) * math.prod(math.factorial(n) for n in occ_out)
    return permanent(sub) / math.sqrt(norm)
