"""Tampering scenarios and the attack-budget formulas.

Each scenario is turned into the coincidence statistics that the analyzer
would see during one sampling window. Scenarios are plain frozen dataclasses
so they can be matched with ``isinstance`` and compared by value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from qseal.photonics import (
    CoincidenceProbabilities,
    TemporalModel,
    TwoPhotonState,
    ValidationError,
    bsa_probabilities,
    multimode_probabilities,
)

PSI_PLUS_PHASE = math.pi


class DomainError(ValueError):
    """Raised when a formula is evaluated outside its domain."""


@dataclass(frozen=True)
class Authentic:
    phase: float = PSI_PLUS_PHASE


@dataclass(frozen=True)
class InterceptResend:
    state: TwoPhotonState


@dataclass(frozen=True)
class Redirection:
    t_d: float


@dataclass(frozen=True)
class Blackout:
    pass


@dataclass(frozen=True)
class ShortTimeInjection:
    """``inner`` replaces the authentic signal for the first ``t`` seconds of a window."""

    inner: "TamperScenario"
    t: float
    phase: float = PSI_PLUS_PHASE

    def __post_init__(self):
        if isinstance(self.inner, ShortTimeInjection):
            raise ValidationError("ShortTimeInjection cannot be nested")
        if not (self.t >= 0 and math.isfinite(self.t)):
            raise ValidationError("injection duration must be non-negative")


TamperScenario = Union[Authentic, InterceptResend, Redirection, Blackout, ShortTimeInjection]


@dataclass(frozen=True)
class EffectiveStatistics:
    probs: CoincidenceProbabilities
    pair_rate_scale: float = 1.0


def dephase(probs: CoincidenceProbabilities, visibility: float) -> CoincidenceProbabilities:
    """Mix in a fraction ``1 - visibility`` of pairs that do not two-photon interfere.

    Interference only moves weight between the ds and dd pathways, so the
    non-interfering part splits that weight evenly.
    """
    if visibility == 1.0:
        return probs
    if not 0.0 <= visibility <= 1.0:
        raise ValidationError("visibility must lie in [0, 1]")
    pw = dict(probs.pathway)
    mixed = ("h2v2", "h3v3", "h2v3", "v2h3")
    flat = sum(pw[k] for k in mixed) / 4
    for k in mixed:
        pw[k] = visibility * pw[k] + (1 - visibility) * flat
    half = (probs.p_ds + probs.p_dd) / 2
    return CoincidenceProbabilities(
        probs.p_sd,
        probs.p_ss,
        visibility * probs.p_ds + (1 - visibility) * half,
        visibility * probs.p_dd + (1 - visibility) * half,
        pathway=pw,
    )


def _check_scenario(scenario):
    if not isinstance(scenario, (Authentic, InterceptResend, Redirection, Blackout, ShortTimeInjection)):
        raise ValidationError(f"unknown scenario {scenario!r}")


def effective_statistics(
    scenario: TamperScenario,
    temporal: TemporalModel = TemporalModel(),
    window: float = 10.0,
    visibility: float = 1.0,
) -> EffectiveStatistics:
    """Statistics of the pairs reaching the analyzer under ``scenario``.

    ``visibility`` degrades pairs emitted by the seal's own source (authentic
    and redirected photons); states injected by an intruder are used as given.
    """
    _check_scenario(scenario)
    if isinstance(scenario, Authentic):
        base = multimode_probabilities(scenario.phase, TemporalModel(0.0, temporal.delta_t))
        return EffectiveStatistics(dephase(base, visibility))
    if isinstance(scenario, InterceptResend):
        return EffectiveStatistics(bsa_probabilities(scenario.state))
    if isinstance(scenario, Redirection):
        base = multimode_probabilities(PSI_PLUS_PHASE, TemporalModel(scenario.t_d, temporal.delta_t))
        return EffectiveStatistics(dephase(base, visibility))
    if isinstance(scenario, Blackout):
        return EffectiveStatistics(
            multimode_probabilities(PSI_PLUS_PHASE, TemporalModel(0.0, temporal.delta_t)), 0.0
        )

    if not window > 0:
        raise ValidationError("window must be positive")
    if scenario.t > window:
        raise ValidationError(f"injection of {scenario.t} s exceeds the {window} s window")
    w = scenario.t / window
    authentic = effective_statistics(Authentic(scenario.phase), temporal, window, visibility)
    if isinstance(scenario.inner, Blackout):
        return EffectiveStatistics(authentic.probs, 1.0 - w)
    inner = effective_statistics(scenario.inner, temporal, window, visibility)
    return EffectiveStatistics(inner.probs.mix(authentic.probs, w))


def mixed_correlation(t: float, T: float, E0: float, E1: float) -> float:
    """Correlation of a window in which a state with ``E0`` replaced ``E1`` for ``t`` of ``T`` seconds."""
    if not T > 0:
        raise ValidationError("T must be positive")
    if not 0 <= t <= T:
        raise ValidationError(f"t={t} outside [0, {T}]")
    return (t / T) * E0 + ((T - t) / T) * E1


def min_spoof_duration(E1: float, E0: float, epsilon: float, T: float) -> float:
    """Injection duration above which the expected window correlation falls below ``epsilon``."""
    if not E1 > E0:
        raise DomainError("E1 must exceed E0")
    if not E0 <= epsilon < E1:
        raise DomainError("threshold must satisfy E0 <= epsilon < E1")
    return (E1 - epsilon) / (E1 - E0) * T


def thermal_drift(L0: float, dT: float, alpha: float = 1e-6) -> float:
    """One-way fiber length change (m) for a temperature change ``dT``."""
    if L0 < 0:
        raise ValidationError("fiber length must be non-negative")
    return alpha * L0 * dT
