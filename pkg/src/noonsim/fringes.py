"""Counts-versus-phase data, harmonic projection and cosine fitting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class AliasingError(ValueError):
    """The phase grid cannot resolve the requested harmonic."""


class FringeDataError(ValueError):
    pass


@dataclass(frozen=True)
class FringeData:
    """Counts per counting interval at each phase.

    ``sampled`` holds Poisson draws (or a derived series such as sampled
    counts minus a model background); fits prefer it over ``mean``.
    """

    phi: np.ndarray
    mean: np.ndarray
    sigma: np.ndarray
    sampled: np.ndarray | None = None
    metadata: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        arrays = {"mean": self.mean, "sigma": self.sigma}
        if self.sampled is not None:
            arrays["sampled"] = self.sampled
        for name, arr in arrays.items():
            if np.shape(arr) != phi.shape:
                raise FringeDataError(f"{name} has shape {np.shape(arr)}, phi has {phi.shape}")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))
        if self.sampled is not None:
            object.__setattr__(self, "sampled", np.asarray(self.sampled))

    @classmethod
    def from_mean(cls, phi, mean, metadata=None) -> FringeData:
        mean = np.asarray(mean, dtype=float)
        return cls(phi, mean, np.sqrt(np.clip(mean, 0, None)), None, metadata or {})

    @property
    def counts(self) -> np.ndarray:
        return np.asarray(self.sampled if self.sampled is not None else self.mean, dtype=float)

    def __len__(self):
        return len(self.phi)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi_rad", "mean", "sampled", "sigma"])
        for i in range(len(self.phi)):
            s = "" if self.sampled is None else _fmt(self.sampled[i])
            w.writerow([repr(float(self.phi[i])), repr(float(self.mean[i])), s, repr(float(self.sigma[i]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, metadata: Mapping | None = None) -> FringeData:
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise FringeDataError("empty fringe CSV")
        missing = {"phi_rad", "mean", "sampled", "sigma"} - set(rows[0])
        if missing:
            raise FringeDataError(f"fringe CSV lacks columns {sorted(missing)}")
        phi = [float(r["phi_rad"]) for r in rows]
        mean = [float(r["mean"]) for r in rows]
        sigma = [float(r["sigma"]) for r in rows]
        has_sampled = [r["sampled"] != "" for r in rows]
        if any(has_sampled) and not all(has_sampled):
            raise FringeDataError("sampled column is partially filled")
        sampled = None
        if all(has_sampled):
            vals = [r["sampled"] for r in rows]
            if all(_is_int(v) for v in vals):
                sampled = np.array([int(v) for v in vals], dtype=np.int64)
            else:
                sampled = np.array([float(v) for v in vals])
        return cls(phi, mean, sigma, sampled, metadata or {})


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _is_int(text: str) -> bool:
    try:
        int(text)
    except ValueError:
        return False
    return True


def check_grid(phi: np.ndarray, harmonics: Sequence[int]) -> None:
    """Require a uniform grid spanning a full period with enough points per harmonic."""
    phi = np.asarray(phi, dtype=float)
    ks = [k for k in harmonics if k > 0]
    if not ks:
        return
    k_max, k_min = max(ks), min(ks)
    n = len(phi)
    if n < 2 * k_max + 1:
        raise AliasingError(f"{n} points cannot resolve harmonic {k_max} (need >= {2 * k_max + 1})")
    steps = np.diff(phi)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise AliasingError("phase grid must be uniform and increasing")
    if n * steps[0] < 2 * math.pi / k_min - 1e-9:
        raise AliasingError(f"grid spans less than one period of harmonic {k_min}")


def _design(phi: np.ndarray, harmonics: Sequence[int]) -> np.ndarray:
    cols = [np.ones_like(phi)]
    for k in harmonics:
        if k > 0:
            cols += [np.cos(k * phi), np.sin(k * phi)]
    return np.column_stack(cols)


@dataclass(frozen=True)
class HarmonicDecomposition:
    """harmonic k -> (amplitude, phase) with value = sum amp cos(k phi + phase)."""

    components: Mapping[int, tuple[float, float]]

    def amplitude(self, k: int) -> float:
        return self.components[k][0]

    def phase(self, k: int) -> float:
        return self.components[k][1]

    def evaluate(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi)
        for k, (a, p) in self.components.items():
            out = out + (a if k == 0 else a * np.cos(k * phi + p))
        return out

    def __add__(self, other: HarmonicDecomposition) -> HarmonicDecomposition:
        comps = {}
        for k in sorted(set(self.components) | set(other.components)):
            z = _as_complex(self.components.get(k, (0.0, 0.0)), k) + _as_complex(other.components.get(k, (0.0, 0.0)), k)
            comps[k] = _from_complex(z, k)
        return HarmonicDecomposition(comps)

    def to_dict(self) -> dict:
        return {
            "components": [
                {"harmonic": k, "amplitude": a, **({} if k == 0 else {"phase": p})}
                for k, (a, p) in sorted(self.components.items())
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> HarmonicDecomposition:
        return cls({int(c["harmonic"]): (float(c["amplitude"]), float(c.get("phase", 0.0))) for c in data["components"]})


def _as_complex(comp: tuple[float, float], k: int) -> complex:
    a, p = comp
    return complex(a) if k == 0 else a * complex(math.cos(p), math.sin(p))


def _from_complex(z: complex, k: int) -> tuple[float, float]:
    if k == 0:
        return (z.real, 0.0)
    return (abs(z), math.atan2(z.imag, z.real))


def fourier_decompose(phi, samples, harmonics: Sequence[int] = (0, 1, 2, 3)) -> HarmonicDecomposition:
    """Project samples onto {1, cos k phi, sin k phi}; amplitude sqrt(C^2 + S^2).

    The constant term is always fitted. Harmonic 0 is reported as the signed
    mean level (amplitudes are non-negative for valid rate data).
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(samples, dtype=float)
    ks = sorted({k for k in harmonics if k > 0})
    check_grid(phi, ks)
    coef, *_ = np.linalg.lstsq(_design(phi, ks), y, rcond=None)
    comps: dict[int, tuple[float, float]] = {}
    if 0 in harmonics:
        comps[0] = (float(coef[0]), 0.0)
    for i, k in enumerate(ks):
        c, s = coef[1 + 2 * i], coef[2 + 2 * i]
        comps[k] = (float(math.hypot(c, s)), float(math.atan2(-s, c)))
    return HarmonicDecomposition(comps)


@dataclass(frozen=True)
class FringeFit:
    """A + B cos(k phi + delta) with visibility B / A.

    Standard errors come from the per-point sigma when the data carry one,
    otherwise from the residual scatter.
    """

    k: int
    offset: float
    amplitude: float
    delta: float
    visibility: float
    residual: float
    offset_err: float = math.nan
    amplitude_err: float = math.nan
    visibility_err: float = math.nan
    flags: tuple[str, ...] = ()

    def evaluate(self, phi) -> np.ndarray:
        return self.offset + self.amplitude * np.cos(self.k * np.asarray(phi, dtype=float) + self.delta)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "A": self.offset,
            "B": self.amplitude,
            "delta": self.delta,
            "visibility": self.visibility,
            "residual": self.residual,
            "A_err": self.offset_err,
            "B_err": self.amplitude_err,
            "visibility_err": self.visibility_err,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> FringeFit:
        return cls(
            int(data["k"]), float(data["A"]), float(data["B"]), float(data["delta"]),
            float(data["visibility"]), float(data["residual"]),
            float(data.get("A_err", math.nan)), float(data.get("B_err", math.nan)),
            float(data.get("visibility_err", math.nan)), tuple(data.get("flags", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def fit_fringe(data: FringeData, k: int, use_sigma: bool = True) -> FringeFit:
    """Linear least squares on {1, cos k phi, sin k phi}.

    Ordinary (unweighted) estimates; the covariance is the sandwich form
    with the data's per-point variance, so Poisson error bars propagate
    into the visibility error.
    """
    if len(data) == 0:
        raise FringeDataError("cannot fit empty data")
    if k < 1:
        raise FringeDataError("harmonic must be >= 1")
    phi, y = data.phi, data.counts
    x = _design(phi, [k])
    flags: list[str] = []
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < 3:
        flags.append("singular")
    a, c, s = (float(v) for v in coef)
    resid = y - x @ coef
    b = math.hypot(c, s)
    delta = math.atan2(-s, c)

    xtx_inv = np.linalg.pinv(x.T @ x)
    if use_sigma and np.any(data.sigma > 0):
        var = data.sigma**2
    else:
        dof = max(len(y) - 3, 1)
        var = np.full_like(y, float(resid @ resid) / dof)
    cov = xtx_inv @ (x.T * var) @ x @ xtx_inv

    if a <= 0:
        flags.append("nonpositive_offset")
        vis = math.nan
        vis_err = math.nan
    else:
        vis = b / a
        # delta method on V = sqrt(C^2 + S^2) / A
        grad = np.array([-b / a**2, *(np.array([c, s]) / (a * b) if b > 0 else (0.0, 0.0))])
        vis_err = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
        if vis > 1:
            flags.append("visibility_above_one")
    b_grad = np.array([0.0, c / b, s / b]) if b > 0 else np.zeros(3)
    return FringeFit(
        k=k,
        offset=a,
        amplitude=b,
        delta=delta,
        visibility=vis,
        residual=float(np.linalg.norm(resid)),
        offset_err=float(math.sqrt(max(cov[0, 0], 0.0))),
        amplitude_err=float(math.sqrt(max(b_grad @ cov @ b_grad, 0.0))),
        visibility_err=vis_err,
        flags=tuple(flags),
    )


def subtract_background(total: FringeData, background: FringeData) -> FringeData:
    """Pointwise difference with uncertainties added in quadrature."""
    if total.phi.shape != background.phi.shape or not np.allclose(total.phi, background.phi, atol=1e-12, rtol=0):
        raise FringeDataError("background and total are on different phase grids")
    sampled = None
    if total.sampled is not None:
        sampled = total.sampled.astype(float) - background.counts
    return FringeData(
        total.phi,
        total.mean - background.mean,
        np.sqrt(total.sigma**2 + background.sigma**2),
        sampled,
        {**dict(total.metadata), "background_subtracted": True},
    )
