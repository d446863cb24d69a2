"""NOON target states and the three-photon construction chain.

The chain starts from one H and one V down-converted photon in separate
spatial modes, merges them on a PBS, rotates them to +/-45 deg, filters them
through a stack of Brewster interfaces (partial polarizer), injects a
V-polarized local-oscillator photon at the last interface, converts circular
to linear polarization with a QWP, and applies the scanned phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Mapping

import numpy as np

from .elements import (
    HV,
    PBS_MODES,
    CircuitElement,
    ModeTransform,
    apply_mode_transform,
    hwp,
    inject_lo,
    interface_beamsplitter,
    linear_to_circular,
    circular_to_linear,
    partial_polarizer,
    pass_interface,
    pbs_combine,
    phase_shift,
    qwp,
)
from .fock import (
    DEFAULT_N_MAX,
    FockError,
    ModeSet,
    PhotonOverflowError,
    StateVector,
    apply_creation,
    apply_creation_combination,
    fidelity_up_to_global_phase,
    make_vacuum,
)

LINEAR, CIRCULAR = "linear-HV", "circular"

# closed form quoted for the ideal joint success of both post-selections
REFERENCE_SUCCESS = math.cos(math.pi / 12) ** 4 / 3 ** (1 / 6)


@dataclass(frozen=True)
class NoonSpec:
    n: int
    chi: float | None = None
    basis: str = LINEAR
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        if self.n < 1:
            raise FockError("NOON photon number must be >= 1")
        if self.n > self.n_max:
            raise PhotonOverflowError(f"N={self.n} exceeds n_max={self.n_max}")
        if self.basis not in (LINEAR, CIRCULAR):
            raise FockError(f"basis must be {LINEAR!r} or {CIRCULAR!r}")

    @property
    def relative_phase(self) -> float:
        return 2 * math.pi / self.n if self.chi is None else self.chi


def build_noon_target(spec: NoonSpec) -> StateVector:
    """prod_k (a†_a + e^{ik chi} a†_b)|0>, normalized.

    For ``basis="circular"`` the modes a, b are L, R and the result is
    expressed over (H, V).
    """
    state = make_vacuum(("a", "b"), spec.n_max)
    for k in range(spec.n):
        state = apply_creation_combination(state, {"a": 1.0, "b": np.exp(1j * k * spec.relative_phase)})
    state = StateVector(ModeSet(HV), state.pruned(1e-13).amplitudes, spec.n_max).normalized()
    if spec.basis == CIRCULAR:
        state = apply_mode_transform(state, circular_to_linear())
    return state


def to_circular(state: StateVector) -> StateVector:
    """Re-express an (H, V) state over the circular modes (L, R)."""
    out = apply_mode_transform(state, linear_to_circular())
    return StateVector(ModeSet(("L", "R")), out.amplitudes, out.n_max)


def check_sixfold_symmetry(state: StateVector) -> float:
    """Largest |amplitude| on |2,1>_LR or |1,2>_LR of the normalized 3-photon state."""
    if state.photon_numbers() != {3}:
        raise FockError(f"expected a 3-photon state, got photon numbers {sorted(state.photon_numbers())}")
    lr = to_circular(state.normalized())
    return max(abs(lr.amplitude((2, 1))), abs(lr.amplitude((1, 2))))


def polarization_product(angles: list[float], n_max: int = DEFAULT_N_MAX) -> StateVector:
    """prod_k a†_{angle_k}|0> over (H, V), angles from vertical, normalized."""
    state = make_vacuum(HV, n_max)
    for th in angles:
        state = apply_creation_combination(state, {"H": math.sin(th), "V": math.cos(th)})
    return state.normalized()


@dataclass(frozen=True)
class ChainConfig:
    """Parameters of the optical chain; angles in degrees, transmissions as amplitudes.

    ``phase_origin`` (radians) is the wedge offset added to the scanned phase;
    the default puts the output at (|3,0> + e^{3i phi}|0,3>)/sqrt(2).
    """

    hwp_deg: float = 22.5
    pp_t_h: float = 1.0
    pp_t_v: float = 1 / math.sqrt(3)
    pp_interfaces: int = 6
    lo_t_v: float | None = None
    lo_t_h: float = 1.0
    lo_polarization_deg: float = 0.0
    qwp_deg: float = 45.0
    phase_origin: float = math.pi / 6
    n_max: int = DEFAULT_N_MAX

    @property
    def last_interface_t_v(self) -> float:
        if self.lo_t_v is not None:
            return self.lo_t_v
        return self.pp_t_v ** (1 / self.pp_interfaces)

    @property
    def head_t_v(self) -> float:
        """V amplitude transmission of the interfaces before the LO injection."""
        t = self.pp_t_v / self.last_interface_t_v
        if t > 1 + 1e-12:
            raise FockError("LO interface transmits less than the whole partial polarizer")
        return min(t, 1.0)

    @property
    def head_t_h(self) -> float:
        return self.pp_t_h / self.lo_t_h

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> ChainConfig:
        return cls(**data)


@dataclass(frozen=True)
class ChainResult:
    state: StateVector
    success_probability: float
    stage_log: tuple[tuple[str, float], ...]
    intermediates: Mapping[str, StateVector] = field(default_factory=dict, compare=False)

    def to_dict(self, with_intermediates: bool = True) -> dict:
        out = {
            "state": self.state.to_dict(),
            "success_probability": self.success_probability,
            "stage_log": [{"stage": s, "success_probability": p} for s, p in self.stage_log],
        }
        if with_intermediates:
            out["intermediates"] = {k: v.to_dict() for k, v in self.intermediates.items()}
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> ChainResult:
        return cls(
            StateVector.from_dict(data["state"]),
            float(data["success_probability"]),
            tuple((r["stage"], float(r["success_probability"])) for r in data["stage_log"]),
            {k: StateVector.from_dict(v) for k, v in data.get("intermediates", {}).items()},
        )


def _lossy(state: StateVector, t: ModeTransform) -> tuple[StateVector, float]:
    out = apply_mode_transform(state, t)
    p = out.norm_squared() / state.norm_squared()
    return out.normalized(), p


def chain_head(config: ChainConfig = ChainConfig()) -> ChainResult:
    """Every stage before the phase shifter; independent of the scanned phase."""
    log: list[tuple[str, float]] = []
    inter: dict[str, StateVector] = {}

    dc = make_vacuum(PBS_MODES, config.n_max)
    dc = apply_creation(apply_creation(dc, "in1H"), "in2V")
    log.append(("dc_pair", 1.0))

    res = pbs_combine(dc)
    state = res.state
    log.append(("pbs", res.success_probability))
    inter["pbs"] = state

    state = apply_mode_transform(state, hwp(math.radians(config.hwp_deg)))
    log.append(("hwp", 1.0))
    inter["hwp"] = state

    state, p = _lossy(state, partial_polarizer(config.head_t_h, config.head_t_v))
    log.append(("partial_polarizer", p))
    inter["partial_polarizer_head"] = state

    bs = interface_beamsplitter(config.lo_t_h, config.last_interface_t_v)
    # the DC pair alone after every interface: the reference for the +/-60 deg form
    inter["partial_polarizer"] = pass_interface(state, bs).state

    res = inject_lo(state, math.radians(config.lo_polarization_deg), bs)
    if res.failed:
        raise FockError("LO injection has zero success probability")
    state = res.state
    log.append(("lo_injection", res.success_probability))
    inter["lo_injection"] = state

    state = apply_mode_transform(state, qwp(math.radians(config.qwp_deg)))
    log.append(("qwp", 1.0))
    inter["qwp"] = state

    return ChainResult(state, math.prod(p for _, p in log), tuple(log), inter)


def run_paper_chain(phi: float, config: ChainConfig = ChainConfig(), head: ChainResult | None = None) -> ChainResult:
    """Full chain at phase ``phi`` (radians); ``head`` may be reused across phases."""
    head = chain_head(config) if head is None else head
    state = apply_mode_transform(head.state, phase_shift(phi + config.phase_origin))
    log = head.stage_log + (("phase_shift", 1.0),)
    return ChainResult(state, head.success_probability, log, dict(head.intermediates))


def solve_qwp_angle(config: ChainConfig = ChainConfig(), grid_deg: int = 180) -> float:
    """QWP fast-axis angle (deg, in [0, 180)) whose output has only |3,0> and |0,3>.

    Scans whole degrees, then keeps the angle with the smallest weight on
    the mixed components. Returns the smallest such angle.
    """
    pre = chain_head(config).intermediates["lo_injection"]
    best, best_leak = 0.0, math.inf
    for deg in np.arange(0, 180, 180 / grid_deg):
        out = apply_mode_transform(pre, qwp(math.radians(deg)))
        leak = abs(out.amplitude((2, 1))) ** 2 + abs(out.amplitude((1, 2))) ** 2
        if leak < best_leak - 1e-12:
            best, best_leak = float(deg), leak
    return best


def solve_phase_origin(config: ChainConfig = ChainConfig()) -> float:
    """Wedge offset that makes the chain output equal (|3,0> + |0,3>)/sqrt(2) at phi = 0."""
    st = chain_head(config).state
    rel = st.amplitude((0, 3)) / st.amplitude((3, 0))
    return float((-np.angle(rel) / 3) % (2 * math.pi / 3))


def chain_circuit_tail(config: ChainConfig = ChainConfig()) -> list[CircuitElement]:
    """The post-injection elements as a circuit description (phase scanned)."""
    return [
        CircuitElement("qwp", {"theta_deg": config.qwp_deg}),
        CircuitElement("phase_shift", {"phi": "scan"}),
    ]


def target_fidelity(result: ChainResult, n: int = 3) -> float:
    return fidelity_up_to_global_phase(result.state, build_noon_target(NoonSpec(n, n_max=result.state.n_max)))


__all__ = [
    "CIRCULAR",
    "LINEAR",
    "REFERENCE_SUCCESS",
    "ChainConfig",
    "ChainResult",
    "NoonSpec",
    "build_noon_target",
    "chain_circuit_tail",
    "chain_head",
    "check_sixfold_symmetry",
    "polarization_product",
    "run_paper_chain",
    "solve_phase_origin",
    "solve_qwp_angle",
    "target_fidelity",
    "to_circular",
]
