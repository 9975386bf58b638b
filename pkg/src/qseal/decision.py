"""Binary tamper detection on windowed correlation estimates."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfc, erfcinv

from qseal.estimator import Estimate
from qseal.photonics import ValidationError


class DomainError(ValueError):
    pass


class Outcome(str, enum.Enum):
    AUTHENTIC = "Authentic"
    TAMPER_ALARM = "TamperAlarm"
    BLACKOUT_ALARM = "BlackoutAlarm"


@dataclass(frozen=True)
class DecisionConfig:
    """Operating point of the detector.

    ``e1`` and ``sigma`` characterize normal operation; ``e0`` is the mean the
    estimate takes under tampering (at most 1/2 for any separable input).
    ``epsilon`` may be left unset when only ROC analysis is wanted.
    """

    epsilon: Optional[float] = None
    e0: float = 0.5
    e1: float = 0.8
    sigma: float = 0.03
    min_coincidences: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")
        if abs(self.e0) > 0.5:
            raise ValidationError("tampered mean must satisfy |e0| <= 1/2")
        if not self.e0 <= self.e1 <= 1.0:
            raise ValidationError("need e0 <= e1 <= 1")
        if self.epsilon is not None and not self.e0 <= self.epsilon <= self.e1:
            raise ValidationError("need e0 <= epsilon <= e1")
        if self.min_coincidences < 0:
            raise ValidationError("min_coincidences must be non-negative")

    def with_epsilon(self, epsilon: float) -> "DecisionConfig":
        return DecisionConfig(epsilon, self.e0, self.e1, self.sigma, self.min_coincidences)


@dataclass(frozen=True)
class Verdict:
    window_id: int
    e_kappa: float
    sigma_kappa: float
    outcome: Outcome
    threshold_used: float


def decide(est: Estimate, cfg: DecisionConfig) -> Verdict:
    """Classify one window. Count starvation is checked before the threshold."""
    if cfg.epsilon is None:
        raise ValidationError("decision threshold epsilon is not set")
    if est.n <= 0 or est.n < cfg.min_coincidences:
        outcome = Outcome.BLACKOUT_ALARM
    elif est.e_kappa <= cfg.epsilon:
        outcome = Outcome.TAMPER_ALARM
    else:
        outcome = Outcome.AUTHENTIC
    return Verdict(est.window_id, est.e_kappa, est.sigma_kappa, outcome, cfg.epsilon)


def _tail(mean, epsilon, sigma):
    return 0.5 * erfc((mean - epsilon) / (math.sqrt(2.0) * sigma))


def detection_stats(cfg: DecisionConfig, epsilon: Optional[float] = None) -> tuple[float, float, float]:
    """Return ``(p_d, p_far, p_spoof)`` at threshold ``epsilon`` (default ``cfg.epsilon``)."""
    eps = cfg.epsilon if epsilon is None else epsilon
    if eps is None:
        raise ValidationError("no threshold given")
    p_d = float(_tail(cfg.e0, eps, cfg.sigma))
    p_far = float(_tail(cfg.e1, eps, cfg.sigma))
    return p_d, p_far, 1.0 - p_d


def threshold_for_far(e1: float, sigma: float, target_far: float) -> float:
    """Threshold at which an authentic window alarms with probability ``target_far``."""
    if not 0.0 < target_far <= 0.5:
        raise DomainError("target false-alarm rate must lie in (0, 0.5]")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return e1 - math.sqrt(2.0) * sigma * float(erfcinv(2.0 * target_far))


def roc_curve(cfg: DecisionConfig, n_points: int = 201) -> list[tuple[float, float]]:
    """``(p_far, p_d)`` pairs for thresholds swept over ``[e0 - 6 sigma, e1 + 6 sigma]``."""
    return [(p_far, p_d) for _, p_far, p_d in roc_table(cfg, n_points)]


def roc_table(cfg: DecisionConfig, n_points: int = 201) -> list[tuple[float, float, float]]:
    if n_points < 2:
        raise ValidationError("need at least two ROC points")
    eps = np.linspace(cfg.e0 - 6 * cfg.sigma, cfg.e1 + 6 * cfg.sigma, n_points)
    p_d = _tail(cfg.e0, eps, cfg.sigma)
    p_far = _tail(cfg.e1, eps, cfg.sigma)
    return [(float(e), float(f), float(d)) for e, f, d in zip(eps, p_far, p_d)]


def write_roc_csv(path, table) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["epsilon", "p_far", "p_d"])
        for row in table:
            out.writerow([f"{x:.17g}" for x in row])
