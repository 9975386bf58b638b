"""Two-photon polarization states and their Bell-state analyzer statistics.

The analyzer mixes input modes 0 and 1 on a symmetric beamsplitter and
polarization-resolves output ports 2 and 3. Coincidences are labelled by the
polarization and port of both photons, e.g. ``h2v3`` is one horizontally
polarized photon in port 2 and one vertically polarized photon in port 3.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

NORM_TOL = 1e-9

# All ten pathways the analyzer can produce, grouped by coincidence type.
PATHWAYS = (
    "h2h3", "v2v3",                  # sd: same polarization, different port
    "h2h2", "h3h3", "v2v2", "v3v3",  # ss: same polarization, same port
    "h2v2", "h3v3",                  # ds: different polarization, same port
    "h2v3", "v2h3",                  # dd: different polarization, different port
)

PATHWAY_TYPE = {
    "h2h3": "sd", "v2v3": "sd",
    "h2h2": "ss", "h3h3": "ss", "v2v2": "ss", "v3v3": "ss",
    "h2v2": "ds", "h3v3": "ds",
    "h2v3": "dd", "v2h3": "dd",
}

# Number of pathways sharing each coincidence type's probability equally.
_TYPE_MULTIPLICITY = {"sd": 2, "ss": 4, "ds": 2, "dd": 2}


class ValidationError(ValueError):
    """Raised when an input violates a model invariant."""


@dataclass(frozen=True)
class TwoPhotonState:
    """Pure state a|H0H1> + b|H0V1> + c|V0H1> + d|V0V1>."""

    a: complex = 0j
    b: complex = 0j
    c: complex = 0j
    d: complex = 0j

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, complex(getattr(self, name)))

    @property
    def norm2(self) -> float:
        return abs(self.a) ** 2 + abs(self.b) ** 2 + abs(self.c) ** 2 + abs(self.d) ** 2

    def validate(self, tol: float = NORM_TOL) -> "TwoPhotonState":
        if not all(math.isfinite(abs(x)) for x in (self.a, self.b, self.c, self.d)):
            raise ValidationError("state has non-finite amplitudes")
        if abs(self.norm2 - 1.0) > tol:
            raise ValidationError(f"state is not normalized (|psi|^2 = {self.norm2!r})")
        return self

    def normalized(self) -> "TwoPhotonState":
        n = math.sqrt(self.norm2)
        if n == 0:
            raise ValidationError("cannot normalize the zero vector")
        return TwoPhotonState(self.a / n, self.b / n, self.c / n, self.d / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=complex)

    @classmethod
    def from_array(cls, v) -> "TwoPhotonState":
        a, b, c, d = (complex(x) for x in v)
        return cls(a, b, c, d)


class BellState(enum.Enum):
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"

    def state(self) -> TwoPhotonState:
        r = 1 / math.sqrt(2)
        if self is BellState.PSI_PLUS:
            return TwoPhotonState(b=r, c=r)
        if self is BellState.PSI_MINUS:
            return TwoPhotonState(b=r, c=-r)
        if self is BellState.PHI_PLUS:
            return TwoPhotonState(a=r, d=r)
        return TwoPhotonState(a=r, d=-r)


@dataclass(frozen=True)
class CoincidenceProbabilities:
    """Coincidence-type probabilities plus the per-pathway breakdown."""

    p_sd: float
    p_ss: float
    p_ds: float
    p_dd: float
    pathway: Mapping[str, float] = field(default=None, compare=False)

    def __post_init__(self):
        vals = (self.p_sd, self.p_ss, self.p_ds, self.p_dd)
        if any(not math.isfinite(v) or v < -NORM_TOL for v in vals):
            raise ValidationError(f"invalid coincidence probabilities {vals}")
        if abs(sum(vals) - 1.0) > NORM_TOL:
            raise ValidationError(f"coincidence probabilities sum to {sum(vals)!r}")
        if self.pathway is None:
            object.__setattr__(self, "pathway", _symmetric_pathways(*vals))

    @property
    def correlation(self) -> float:
        return self.p_dd - self.p_ds

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_sd, self.p_ss, self.p_ds, self.p_dd)

    def pathway_vector(self) -> np.ndarray:
        """Pathway probabilities ordered as ``PATHWAYS``."""
        return np.array([self.pathway[k] for k in PATHWAYS], dtype=float)

    @classmethod
    def from_types(cls, p_sd, p_ss, p_ds, p_dd) -> "CoincidenceProbabilities":
        return cls(float(p_sd), float(p_ss), float(p_ds), float(p_dd))

    def mix(self, other: "CoincidenceProbabilities", w: float) -> "CoincidenceProbabilities":
        """Convex combination ``w*self + (1-w)*other``."""
        types = (w * x + (1 - w) * y for x, y in zip(self.as_tuple(), other.as_tuple()))
        pathway = {k: w * self.pathway[k] + (1 - w) * other.pathway[k] for k in PATHWAYS}
        return CoincidenceProbabilities(*types, pathway=pathway)


def _symmetric_pathways(p_sd, p_ss, p_ds, p_dd) -> dict[str, float]:
    by_type = {"sd": p_sd, "ss": p_ss, "ds": p_ds, "dd": p_dd}
    return {k: by_type[t] / _TYPE_MULTIPLICITY[t] for k, t in PATHWAY_TYPE.items()}


@dataclass(frozen=True)
class TemporalModel:
    """Relative delay ``t_d`` of the active photon and crystal walk-off window ``delta_t`` (seconds)."""

    t_d: float = 0.0
    delta_t: float = 8e-12

    def __post_init__(self):
        if not (self.delta_t > 0 and math.isfinite(self.delta_t)):
            raise ValidationError("delta_t must be positive and finite")
        if not math.isfinite(self.t_d):
            raise ValidationError("t_d must be finite")

    @property
    def envelope(self) -> float:
        return triangle(2 * self.t_d / self.delta_t)


def _interference(state: TwoPhotonState) -> float:
    return 2.0 * (state.b.conjugate() * state.c).real


def bsa_probabilities(state: TwoPhotonState) -> CoincidenceProbabilities:
    """Detection probabilities of a pure, temporally indistinguishable input."""
    state.validate()
    a2, d2 = abs(state.a) ** 2, abs(state.d) ** 2
    bc2 = abs(state.b) ** 2 + abs(state.c) ** 2
    x = _interference(state)
    pathway = {
        "h2h3": 0.0, "v2v3": 0.0,
        "h2h2": a2 / 2, "h3h3": a2 / 2,
        "v2v2": d2 / 2, "v3v3": d2 / 2,
        "h2v3": (bc2 + x) / 4, "v2h3": (bc2 + x) / 4,
        "h2v2": (bc2 - x) / 4, "h3v3": (bc2 - x) / 4,
    }
    return CoincidenceProbabilities(
        p_sd=0.0,
        p_ss=a2 + d2,
        p_ds=(bc2 - x) / 2,
        p_dd=(bc2 + x) / 2,
        pathway=pathway,
    )


def correlation(state: TwoPhotonState) -> float:
    """Polarization-correlation parameter ``b*c + b c*``."""
    state.validate()
    return _interference(state)


def separable_state(alpha: float, beta: float, A: float, B: float) -> TwoPhotonState:
    """Product of two single-photon polarization states."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    eA, eB = complex(math.cos(A), math.sin(A)), complex(math.cos(B), math.sin(B))
    return TwoPhotonState(ca * cb, eB * ca * sb, eA * sa * cb, eA * eB * sa * sb)


def separable_correlation(alpha: float, beta: float, A: float, B: float) -> float:
    return math.sin(2 * alpha) * math.sin(2 * beta) * math.cos(A - B) / 2


def triangle(x):
    """Unit triangle function, 1-|x| on [-1, 1] and zero elsewhere."""
    if np.ndim(x) == 0:
        ax = abs(float(x))
        return 1.0 - ax if ax <= 1.0 else 0.0
    return np.clip(1.0 - np.abs(np.asarray(x, dtype=float)), 0.0, None)


def multimode_correlation(state: TwoPhotonState, temporal: TemporalModel) -> float:
    return temporal.envelope * correlation(state)


def multimode_probabilities(phase: float, temporal: TemporalModel) -> CoincidenceProbabilities:
    """Statistics of a Psi-like source with relative phase ``phase`` and delay ``temporal.t_d``.

    ``phase = pi`` is Psi+ and ``phase = 0`` is Psi-.
    """
    e = temporal.envelope * math.cos(phase + math.pi)
    p_dd = 0.5 * (1 + e)
    p_ds = 0.5 * (1 - e)
    s = p_dd + p_ds
    return CoincidenceProbabilities.from_types(0.0, 0.0, p_ds / s, p_dd / s)


def bell_overlap(state: TwoPhotonState) -> tuple[float, float]:
    """Overlaps ``(|<state|Psi+>|^2, |<state|Psi->|^2)``."""
    state.validate()
    return abs(state.b + state.c) ** 2 / 2, abs(state.b - state.c) ** 2 / 2
