"""Tamper-indicating quantum seal: photon statistics, event streaming and tamper detection."""

from qseal.photonics import (
    BellState,
    CoincidenceProbabilities,
    TemporalModel,
    TwoPhotonState,
    bell_overlap,
    bsa_probabilities,
    correlation,
    multimode_correlation,
    multimode_probabilities,
    separable_state,
    triangle,
)
from qseal.attacks import (
    Authentic,
    Blackout,
    EffectiveStatistics,
    InterceptResend,
    Redirection,
    ShortTimeInjection,
    effective_statistics,
    min_spoof_duration,
    mixed_correlation,
    thermal_drift,
)
from qseal.estimator import (
    Estimate,
    estimate_correlation,
    gaussian_model,
    hyp2f1_regularized,
    oracle_estimate,
    posterior_density,
)
from qseal.decision import (
    DecisionConfig,
    Verdict,
    decide,
    detection_stats,
    roc_curve,
    threshold_for_far,
)

__version__ = "0.1.0"
