"""Linear optical elements as mode transforms, lifted to Fock space.

Conventions used throughout the package:

* A transform matrix ``M`` acts on creation operators as
  ``a†_i -> sum_j M[j, i] a†_j``; column ``i`` is the Jones vector that
  mode ``i`` is sent to.
* Linear polarization angles are measured from vertical, so a photon at
  angle ``theta`` is ``sin(theta) a†_H + cos(theta) a†_V``.
* Wave-plate fast-axis angles are measured from H (standard Jones form),
  with ``qwp(0) = diag(1, i)`` and ``hwp(0) = diag(1, -1)``.
* Circular modes: ``L = (H + iV)/sqrt(2)``, ``R = (H - iV)/sqrt(2)``.

Sub-unitary matrices are applied directly to the creation operators; this is
the same as a unitary dilation with vacuum ancillas followed by vacuum
post-selection on the ancillas, without materializing the dilation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .fock import (
    PRUNE_THRESHOLD,
    FockError,
    ModeSet,
    Occupation,
    PhotonOverflowError,
    StateVector,
    apply_creation_combination,
)

SV_TOL = 1e-12
H, V = "H", "V"
HV = (H, V)


class ElementError(ValueError):
    """Invalid optical element parameters or mismatched dimensions."""


@dataclass(frozen=True)
class ModeTransform:
    matrix: np.ndarray
    label: str = "transform"
    unitary: bool = field(init=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ElementError(f"{self.label}: transform matrix must be square, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        sv = np.linalg.svd(m, compute_uv=False)
        if sv.max(initial=0.0) > 1 + SV_TOL:
            raise ElementError(f"{self.label}: singular value {sv.max():.15g} > 1 is unphysical")
        unitary = np.allclose(m.conj().T @ m, np.eye(len(m)), atol=SV_TOL, rtol=0)
        object.__setattr__(self, "unitary", bool(unitary))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def then(self, other: ModeTransform) -> ModeTransform:
        """Apply ``self`` first, then ``other``."""
        return ModeTransform(other.matrix @ self.matrix, f"{self.label}>{other.label}")

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)


def compose(*transforms: ModeTransform, label: str | None = None) -> ModeTransform:
    """Sequential composition; the first argument acts first."""
    m = np.eye(transforms[0].dim, dtype=complex)
    for t in transforms:
        m = t.matrix @ m
    return ModeTransform(m, label or ">".join(t.label for t in transforms))


def embed(transform: ModeTransform, n_modes: int, targets: Sequence[int]) -> ModeTransform:
    """Act with ``transform`` on the modes ``targets`` of an ``n_modes`` system."""
    if len(targets) != transform.dim:
        raise ElementError("target count does not match transform dimension")
    m = np.eye(n_modes, dtype=complex)
    idx = np.asarray(targets)
    m[np.ix_(idx, idx)] = transform.matrix
    return ModeTransform(m, transform.label)


# --- lifting to Fock space --------------------------------------------------


def _multinomial_compositions(n: int, k: int):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _multinomial_compositions(n - first, k - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _composition_weights(n: int, k: int) -> tuple[tuple[Occupation, int], ...]:
    # exact integer multinomial n! / prod(k_j!)
    out = []
    for comp in _multinomial_compositions(n, k):
        coef = math.factorial(n)
        for c in comp:
            coef //= math.factorial(c)
        out.append((comp, coef))
    return tuple(out)


def _power_expansion(column: np.ndarray, n: int) -> dict[Occupation, complex]:
    """Monomial coefficients of (sum_j column[j] x_j)^n."""
    k = len(column)
    nz = [j for j in range(k) if column[j] != 0]
    out: dict[Occupation, complex] = {}
    if n == 0:
        return {(0,) * k: 1.0 + 0j}
    for comp, coef in _composition_weights(n, len(nz)):
        term = complex(coef)
        exps = [0] * k
        for j, c in zip(nz, comp):
            if c:
                term *= column[j] ** c
                exps[j] = c
        out[tuple(exps)] = term
    return out


def _poly_mul(p: Mapping[Occupation, complex], q: Mapping[Occupation, complex]) -> dict[Occupation, complex]:
    out: dict[Occupation, complex] = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0j) + c1 * c2
    return out


def _sqrt_fact_prod(occ: Occupation) -> float:
    return math.sqrt(math.prod(math.factorial(n) for n in occ))


def lift_basis_state(matrix: np.ndarray, occ: Occupation) -> dict[Occupation, complex]:
    """Image of the basis state |occ> under the lifted transform."""
    poly: dict[Occupation, complex] = {(0,) * len(occ): 1.0 + 0j}
    for i, n in enumerate(occ):
        if n:
            poly = _poly_mul(poly, _power_expansion(matrix[:, i], n))
    # amplitude -> monomial coefficient divides by sqrt(prod n!); back multiplies by sqrt(prod m!)
    pre = 1 / _sqrt_fact_prod(occ)
    return {m: c * pre * _sqrt_fact_prod(m) for m, c in poly.items()}


def apply_mode_transform(state: StateVector, transform: ModeTransform, prune: float = PRUNE_THRESHOLD) -> StateVector:
    """Substitute a†_i -> sum_j M[j, i] a†_j in every term of ``state``."""
    if transform.dim != len(state.modes):
        raise ElementError(
            f"{transform.label}: dimension {transform.dim} does not match {len(state.modes)} modes"
        )
    m = transform.matrix
    out: dict[Occupation, complex] = {}
    for occ, amp in state.amplitudes.items():
        for new, c in lift_basis_state(m, occ).items():
            out[new] = out.get(new, 0j) + amp * c
    return StateVector(state.modes, {o: a for o, a in out.items() if abs(a) >= prune}, state.n_max)


# --- post-selection ---------------------------------------------------------


@dataclass(frozen=True)
class PostSelectionOutcome:
    state: StateVector
    success_probability: float

    @property
    def failed(self) -> bool:
        return self.success_probability == 0


def postselect_vacuum(state: StateVector, modes: Sequence[str | int]) -> PostSelectionOutcome:
    """Condition on zero photons in ``modes`` and drop those modes.

    A zero-probability outcome returns an amplitude-free state over the
    remaining modes with ``success_probability == 0``.
    """
    idx = sorted({state.modes.index_of(m) for m in modes})
    keep = [i for i in range(len(state.modes)) if i not in idx]
    if not keep:
        raise FockError("cannot post-select on every mode")
    total = state.norm_squared()
    if total == 0:
        raise FockError("cannot post-select a zero-norm state")
    kept = {
        tuple(occ[i] for i in keep): a for occ, a in state.amplitudes.items() if all(occ[i] == 0 for i in idx)
    }
    new_modes = ModeSet(state.modes[i] for i in keep)
    projected = StateVector(new_modes, kept, state.n_max)
    p = projected.norm_squared() / total
    if p == 0:
        return PostSelectionOutcome(projected, 0.0)
    return PostSelectionOutcome(projected.normalized(), float(p))


# --- Jones matrices ---------------------------------------------------------


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def waveplate(theta: float, retardance: float, label: str = "waveplate") -> ModeTransform:
    """Retarder with fast axis at ``theta`` from H."""
    j = _rot(theta) @ np.diag([1, np.exp(1j * retardance)]) @ _rot(-theta)
    return ModeTransform(j, label)


def hwp(theta: float) -> ModeTransform:
    return waveplate(theta, math.pi, f"hwp({math.degrees(theta):g})")


def qwp(theta: float) -> ModeTransform:
    return waveplate(theta, math.pi / 2, f"qwp({math.degrees(theta):g})")


def partial_polarizer(t_h: float, t_v: float) -> ModeTransform:
    """Diagonal amplitude transmission; intensity transmission is t**2."""
    for name, t in (("tH", t_h), ("tV", t_v)):
        if not 0 <= t <= 1:
            raise ElementError(f"partial polarizer amplitude {name}={t} outside [0, 1]")
    return ModeTransform(np.diag([t_h, t_v]), f"pp({t_h:.6g},{t_v:.6g})")


def phase_shift(phi: float) -> ModeTransform:
    """Birefringent phase: V picks up exp(i*phi) per photon."""
    return ModeTransform(np.diag([1, np.exp(1j * phi)]), f"phase({phi:.6g})")


def rotator(alpha: float) -> ModeTransform:
    """Rotate every linear polarization angle by ``alpha``."""
    c, s = math.cos(alpha), math.sin(alpha)
    return ModeTransform(np.array([[c, s], [-s, c]]), f"rot({math.degrees(alpha):g})")


def linear_jones(theta: float) -> np.ndarray:
    """Jones vector (H, V) of linear polarization ``theta`` from vertical."""
    return np.array([math.sin(theta), math.cos(theta)], dtype=complex)


CIRCULAR_TO_HV = np.array([[1, 1], [1j, -1j]]) / math.sqrt(2)


def circular_to_linear() -> ModeTransform:
    """Columns are L and R written in (H, V)."""
    return ModeTransform(CIRCULAR_TO_HV, "LR->HV")


def linear_to_circular() -> ModeTransform:
    return ModeTransform(CIRCULAR_TO_HV.conj().T, "HV->LR")


# --- multi-spatial-mode elements ---------------------------------------------

PBS_MODES = ("in1H", "in1V", "in2H", "in2V")


def pbs() -> ModeTransform:
    """Polarizing beamsplitter on (port1 H, port1 V, port2 H, port2 V).

    H transmits (port1 -> port1, port2 -> port2), V reflects (port1 <-> port2);
    output port 1 is the combined beam.
    """
    m = np.zeros((4, 4))
    m[0, 0] = 1  # 1H -> out1 H
    m[3, 1] = 1  # 1V -> out2 V
    m[2, 2] = 1  # 2H -> out2 H
    m[1, 3] = 1  # 2V -> out1 V
    return ModeTransform(m, "pbs")


def pbs_combine(state: StateVector) -> PostSelectionOutcome:
    """Route a two-spatial-mode state through the PBS and keep output port 1."""
    if len(state.modes) != 4:
        raise ElementError(f"pbs_combine needs 4 modes {PBS_MODES}, got {len(state.modes)}")
    out = apply_mode_transform(state, pbs())
    res = postselect_vacuum(out, [2, 3])
    relabeled = StateVector(ModeSet(HV), res.state.amplitudes, res.state.n_max)
    return PostSelectionOutcome(relabeled, res.success_probability)


INTERFACE_MODES = ("H", "V", "darkH", "darkV")


def interface_beamsplitter(t_h: float, t_v: float) -> ModeTransform:
    """One dielectric interface as a beamsplitter, per polarization.

    Modes are (signal H, signal V, dark H, dark V). Signal-side input is
    transmitted with amplitude t and reflected into the dark port with
    r = sqrt(1 - t^2); the dark-side input reflects into the signal output
    with amplitude r.
    """
    for t in (t_h, t_v):
        if not 0 <= t <= 1:
            raise ElementError(f"interface transmission {t} outside [0, 1]")
    r_h, r_v = math.sqrt(1 - t_h**2), math.sqrt(1 - t_v**2)
    m = np.zeros((4, 4))
    for sig, dark, t, r in ((0, 2, t_h, r_h), (1, 3, t_v, r_v)):
        m[sig, sig], m[dark, sig] = t, r
        m[sig, dark], m[dark, dark] = r, -t
    return ModeTransform(m, f"interface({t_h:.6g},{t_v:.6g})")


def pass_interface(state: StateVector, bs: ModeTransform, dark_state: StateVector | None = None) -> PostSelectionOutcome:
    """Send a (H, V) signal through ``bs`` and keep events with the dark port empty.

    ``dark_state`` optionally supplies photons entering from the dark side, as
    a state over (darkH, darkV); vacuum when omitted.
    """
    if tuple(state.modes) != HV:
        raise ElementError(f"signal must be over {HV}, got {tuple(state.modes)}")
    if bs.dim != 4:
        raise ElementError("interface beamsplitter must act on 4 modes")
    full = state.with_modes(("darkH", "darkV"))
    if dark_state is not None:
        amps: dict[Occupation, complex] = {}
        for o1, a1 in state.amplitudes.items():
            for o2, a2 in dark_state.amplitudes.items():
                if sum(o1) + sum(o2) > state.n_max:
                    raise PhotonOverflowError("combined photon number exceeds n_max")
                amps[o1 + o2] = amps.get(o1 + o2, 0j) + a1 * a2
        full = StateVector(ModeSet(INTERFACE_MODES), amps, state.n_max)
    out = apply_mode_transform(full, bs)
    return postselect_vacuum(out, ["darkH", "darkV"])


def inject_lo(state: StateVector, lo_polarization: float, bs: ModeTransform) -> PostSelectionOutcome:
    """Add one LO photon at the dark-side input of ``bs`` and post-select.

    ``lo_polarization`` is a linear angle from vertical (0 = V).
    """
    if max(state.photon_numbers(), default=0) + 1 > state.n_max:
        raise PhotonOverflowError("LO photon would exceed n_max")
    jones = linear_jones(lo_polarization)
    lo = apply_creation_combination(
        StateVector(ModeSet(("darkH", "darkV")), {(0, 0): 1.0}, state.n_max),
        {"darkH": jones[0], "darkV": jones[1]},
    )
    return pass_interface(state, bs, dark_state=lo)


# --- circuit description files ------------------------------------------------

SCAN = "scan"


@dataclass(frozen=True)
class CircuitElement:
    kind: str
    params: Mapping[str, float | str]

    def is_scanned(self) -> bool:
        return any(v == SCAN for v in self.params.values())

    def transform(self, scan_value: float | None = None) -> ModeTransform:
        def val(key: str, degrees: bool) -> float:
            v = self.params[key]
            if v == SCAN:
                if scan_value is None:
                    raise ElementError(f"{self.kind}: scanned parameter needs a scan value")
                return float(scan_value)
            return math.radians(float(v)) if degrees else float(v)

        k = self.kind
        if k == "hwp":
            return hwp(val("theta_deg", True))
        if k == "qwp":
            return qwp(val("theta_deg", True))
        if k == "rotator":
            return rotator(val("alpha_deg", True))
        if k == "partial_polarizer":
            return partial_polarizer(val("tH", False), val("tV", False))
        if k == "phase_shift":
            key = "phi" if "phi" in self.params else "phi_deg"
            return phase_shift(val(key, key == "phi_deg"))
        raise ElementError(f"unknown element kind {k!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


ELEMENT_KINDS = ("hwp", "qwp", "rotator", "partial_polarizer", "phase_shift")


def parse_circuit(records: Sequence[Mapping]) -> list[CircuitElement]:
    """Validate a circuit description (a list of element records).

    Scanned values are supplied in radians at evaluation time; fixed angles
    in the file are in degrees (``theta_deg``, ``alpha_deg``, ``phi_deg``).
    """
    elements = []
    for rec in records:
        rec = dict(rec)
        kind = rec.pop("kind", None)
        if kind not in ELEMENT_KINDS:
            raise ElementError(f"unknown element kind {kind!r}; expected one of {ELEMENT_KINDS}")
        for key, v in rec.items():
            if v != SCAN and not isinstance(v, (int, float)):
                raise ElementError(f"{kind}.{key}: expected a number or {SCAN!r}, got {v!r}")
            if key == "phi" and v != SCAN:
                raise ElementError("phase_shift: use 'phi_deg' for fixed values, 'phi': 'scan' to scan")
        el = CircuitElement(kind, rec)
        el.transform(0.0)  # validates required keys and ranges
        elements.append(el)
    if sum(e.is_scanned() for e in elements) > 1:
        raise ElementError("at most one circuit element may carry the 'scan' placeholder")
    return elements


@dataclass(frozen=True)
class CircuitResult:
    state: StateVector
    success_probability: float
    stage_log: tuple[tuple[str, float], ...]


def run_circuit(state: StateVector, circuit: Sequence[CircuitElement], scan_value: float | None = None) -> CircuitResult:
    """Apply (H, V) elements in order, renormalizing after lossy ones."""
    log = []
    total = 1.0
    for el in circuit:
        t = el.transform(scan_value)
        out = apply_mode_transform(state, t)
        p = out.norm_squared() / state.norm_squared()
        if p == 0:
            raise ElementError(f"{t.label}: post-selection has zero success probability")
        state = out.normalized() if not t.unitary else out
        log.append((t.label, p))
        total *= p
    return CircuitResult(state, total, tuple(log))
