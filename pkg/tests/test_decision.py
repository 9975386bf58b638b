import csv
import math

import mpmath
import numpy as np
import pytest
from scipy.special import erfc

from qseal.attacks import Authentic
from qseal.coincidence import window_kappa
from qseal.decision import (
    DecisionConfig,
    DomainError,
    Outcome,
    decide,
    detection_stats,
    roc_curve,
    roc_table,
    threshold_for_far,
    write_roc_csv,
)
from qseal.estimator import Estimate, estimate_correlation
from qseal.photonics import PATHWAYS, ValidationError
from qseal.simulate import SourceConfig, simulate_window, window_rng

CFG = DecisionConfig(epsilon=0.62, e0=0.5, e1=0.8, sigma=0.03)


def mp_tail(mean, eps, sigma):
    mpmath.mp.dps = 50
    return mpmath.erfc((mpmath.mpf(mean) - mpmath.mpf(eps)) / (mpmath.sqrt(2) * mpmath.mpf(sigma))) / 2


# -- erfc backend against a 50-digit table -------------------------------------------------

def test_erfc_against_high_precision_table():
    mpmath.mp.dps = 50
    xs = np.concatenate([np.linspace(-6, 6, 241), np.linspace(6, 26, 81)])
    for x in xs:
        want = mpmath.erfc(mpmath.mpf(float(x)))
        assert float(erfc(x)) == pytest.approx(float(want), rel=1e-14, abs=0)


# -- decide -------------------------------------------------------------------------------

@pytest.mark.parametrize(
    "e, n, outcome",
    [(0.8, 400, Outcome.AUTHENTIC), (0.5, 400, Outcome.TAMPER_ALARM), (0.62, 400, Outcome.TAMPER_ALARM), (0.0, 0, Outcome.BLACKOUT_ALARM)],
)
def test_decide_examples(e, n, outcome):
    v = decide(Estimate(e, 0.03, n, window_id=7), CFG)
    assert v.outcome is outcome
    assert v.window_id == 7 and v.threshold_used == 0.62


def test_blackout_checked_before_threshold():
    cfg = DecisionConfig(0.62, min_coincidences=50)
    assert decide(Estimate(0.1, 0.2, 49.9), cfg).outcome is Outcome.BLACKOUT_ALARM
    assert decide(Estimate(0.1, 0.2, 50.0), cfg).outcome is Outcome.TAMPER_ALARM


def test_decide_needs_threshold():
    with pytest.raises(ValidationError):
        decide(Estimate(0.8, 0.03, 100), DecisionConfig())


def test_config_invariants():
    for kw in [dict(sigma=0), dict(e0=0.6), dict(e0=0.5, e1=0.4), dict(epsilon=0.9), dict(epsilon=0.4), dict(min_coincidences=-1)]:
        with pytest.raises(ValidationError):
            DecisionConfig(**kw)


# -- detection statistics --------------------------------------------------------------------

def test_boundary_values():
    assert detection_stats(CFG, 0.5)[0] == 0.5
    assert detection_stats(CFG, 0.8)[1] == 0.5
    p_d, p_far, p_s = detection_stats(CFG)
    assert p_s == pytest.approx(1 - p_d, abs=1e-16)


@pytest.mark.parametrize("eps", [0.5, 0.55, 0.6, 0.62, 0.7, 0.8])
def test_detection_stats_against_mpmath(eps):
    p_d, p_far, _ = detection_stats(CFG, eps)
    assert p_d == pytest.approx(float(mp_tail(0.5, eps, 0.03)), rel=1e-14)
    assert p_far == pytest.approx(float(mp_tail(0.8, eps, 0.03)), rel=1e-13)


def test_threshold_for_far():
    assert threshold_for_far(0.8, 0.03, 0.5) == 0.8
    for far in (1e-3, 1e-6, 1e-9):
        eps = threshold_for_far(0.8, 0.03, far)
        assert detection_stats(CFG, eps)[1] == pytest.approx(far, rel=1e-12)
    with pytest.raises(DomainError):
        threshold_for_far(0.8, 0.03, 0.0)
    with pytest.raises(DomainError):
        threshold_for_far(0.8, 0.03, 0.6)


def test_threshold_against_bisection():
    mpmath.mp.dps = 50
    target = mpmath.mpf("1e-9")
    eps = mpmath.findroot(lambda x: mp_tail(0.8, x, 0.03) - target, (0.55, 0.75), solver="bisect")
    assert threshold_for_far(0.8, 0.03, 1e-9) == pytest.approx(float(eps), abs=1e-12)
    assert float(eps) == pytest.approx(0.62, abs=5e-3)


def test_operating_point():
    eps = threshold_for_far(0.8, 0.03, 1e-9)
    assert detection_stats(CFG, eps)[0] >= 0.9999
    weak = DecisionConfig(e0=0.5, e1=0.8, sigma=0.04)
    eps = threshold_for_far(0.8, 0.04, 1e-9)
    assert detection_stats(weak, eps)[0] < 0.9999  # the claim weakens at the upper sigma


def test_monotone_in_threshold():
    eps = np.linspace(0.3, 1.0, 200)
    pd = [detection_stats(CFG, e)[0] for e in eps]
    pf = [detection_stats(CFG, e)[1] for e in eps]
    assert all(b >= a for a, b in zip(pd, pd[1:]))
    assert all(b >= a for a, b in zip(pf, pf[1:]))
    assert all(d >= f for d, f in zip(pd, pf))


# -- ROC ------------------------------------------------------------------------------------

def _pd_at(curve, far):
    f, d = np.array(curve).T
    return np.interp(far, f, d)


def test_roc_ordering_by_baseline():
    curves = {e1: roc_curve(DecisionConfig(e0=0.5, e1=e1, sigma=0.1), 401) for e1 in (0.55, 0.7, 0.85)}
    grid = np.logspace(-6, 0, 50)
    lo, mid, hi = (_pd_at(curves[e], grid) for e in (0.55, 0.7, 0.85))
    assert np.all(hi >= mid - 1e-12) and np.all(mid >= lo - 1e-12)
    assert np.any(hi > mid + 0.05)


def test_roc_endpoints_and_monotone():
    curve = roc_curve(CFG, 301)
    assert curve[0][0] < 1e-9 and curve[0][1] < 1e-6
    assert curve[-1][0] > 1 - 1e-6 and curve[-1][1] > 1 - 1e-9
    f, d = np.array(curve).T
    assert np.all(np.diff(f) >= 0) and np.all(np.diff(d) >= 0)


def test_roc_diagonal_and_step():
    for p_far, p_d in roc_curve(DecisionConfig(e0=0.5, e1=0.5, sigma=0.05)):
        assert p_d == pytest.approx(p_far, abs=1e-15)
    table = roc_table(DecisionConfig(e0=0.5, e1=0.8, sigma=1e-4), 1001)
    mid = [row for row in table if 0.51 < row[0] < 0.79]
    assert mid and all(f < 1e-12 and d > 1 - 1e-12 for _, f, d in mid)


def test_roc_csv(tmp_path):
    path = tmp_path / "roc.csv"
    table = roc_table(CFG, 11)
    write_roc_csv(path, table)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epsilon", "p_far", "p_d"]
    assert [tuple(map(float, r)) for r in rows[1:]] == table
    with pytest.raises(OSError):
        write_roc_csv(tmp_path / "missing" / "roc.csv", table)


# -- empirical calibration -------------------------------------------------------------------

def _authentic_estimates(src, seed, n):
    out = np.empty(n)
    for w in range(n):
        ev = simulate_window(Authentic(), src, rng=window_rng(seed, w))
        out[w] = estimate_correlation(window_kappa(ev, src.pathway_efficiency)).e_kappa
    return out


@pytest.mark.slow
def test_empirical_false_alarm_rate():
    src = SourceConfig(pair_rate=1e4, pathway_efficiency={k: 0.05 for k in PATHWAYS}, dark_rate=0.0, duration=1.0)
    pilot = _authentic_estimates(src, 1, 2000)
    e1, sigma = float(pilot.mean()), float(pilot.std(ddof=1))
    cfg = DecisionConfig(threshold_for_far(e1, sigma, 1e-2), e0=0.5, e1=e1, sigma=sigma)
    est = _authentic_estimates(src, 2, 10_000)
    alarms = np.mean([decide(Estimate(e, sigma, 500), cfg).outcome is Outcome.TAMPER_ALARM for e in est])
    sd = math.sqrt(1e-2 * (1 - 1e-2) / est.size)
    assert abs(alarms - 1e-2) <= 3 * sd
