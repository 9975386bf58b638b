import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qseal.attacks import Authentic
from qseal.coincidence import (
    MONITORED,
    RawCounts,
    classify,
    correct_counts,
    find_coincidences,
    reduce_to_kappa,
    sort_events,
    window_kappa,
)
from qseal.estimator import KappaTotals
from qseal.photonics import PATHWAYS, ValidationError
from qseal.simulate import CHANNEL_IDS, EVENT_DTYPE, SourceConfig, simulate_window, window_rng
from qseal.wire import encode_packets

H2A, H2B, V2A, V2B, H3, V3 = (CHANNEL_IDS[k] for k in ("h2a", "h2b", "v2a", "v2b", "h3", "v3"))


def ev(*pairs):
    out = np.empty(len(pairs), dtype=EVENT_DTYPE)
    for i, (ch, t) in enumerate(pairs):
        out[i] = (ch, t)
    return sort_events(out)


def test_classify_labels():
    assert classify(H2A, V3) == "h2v3"
    assert classify(V3, H2B) == "h2v3"
    assert classify(V2A, H3) == "v2h3"
    assert classify(H2A, H2B) == "h2h2"
    assert classify(V2B, V2A) == "v2v2"
    assert classify(H2A, V2B) == "h2v2"
    assert classify(H3, V3) == "h3v3"
    assert classify(H2A, H3) == "h2h3"
    assert classify(V3, V2B) == "v2v3"
    assert classify(H3, H3) is None
    assert classify(H3, 7) is None


def test_one_coincidence_within_window():
    raw = find_coincidences(ev((H2A, 1000), (V3, 1001)), window_w=2)
    assert raw.c["h2v3"] == 1 and sum(raw.c.values()) == 1


def test_no_coincidence_outside_window():
    raw = find_coincidences(ev((H2A, 1000), (V3, 1005)), window_w=2)
    assert sum(raw.c.values()) == 0


def test_each_click_used_once_earliest_first():
    raw = find_coincidences(ev((H2A, 100), (V3, 101), (H3, 102)), window_w=2)
    assert raw.c["h2v3"] == 1 and sum(raw.c.values()) == 1
    raw = find_coincidences(ev((H3, 100), (H3, 101), (V3, 102)), window_w=2)
    assert raw.c["h3v3"] == 1  # same-channel clicks never pair


def test_unsorted_rejected():
    bad = np.array([(0, 10), (4, 5)], dtype=EVENT_DTYPE)
    with pytest.raises(ValidationError):
        find_coincidences(bad)
    with pytest.raises(ValidationError):
        find_coincidences(ev((0, 1)), window_w=0)
    with pytest.raises(ValidationError):
        find_coincidences(ev((0, 1)), window_w=5, acc_offset=5)


def test_accidentals_of_independent_streams():
    # Two independent Poisson streams: after flooring to ticks, |dtick| <= w covers
    # 2w+1 tick offsets, so the expected count is r1 r2 (2w+1) tick T.
    rng = np.random.default_rng(0)
    r1, r2, T, tick, w = 2e4, 3e4, 2.0, 10e-9, 2
    t1 = rng.random(rng.poisson(r1 * T)) * T
    t2 = rng.random(rng.poisson(r2 * T)) * T
    ch = np.concatenate([np.full(t1.size, H2A), np.full(t2.size, V3)])
    ticks = np.floor(np.concatenate([t1, t2]) / tick).astype(np.uint64)
    e = np.empty(ch.size, dtype=EVENT_DTYPE)
    e["channel"], e["tick"] = ch, ticks
    raw = find_coincidences(sort_events(e), window_w=w, acc_offset=10_000)
    mu = r1 * r2 * (2 * w + 1) * tick * T
    assert abs(raw.c_acc["h2v3"] - mu) < 3 * math.sqrt(mu)
    assert abs(raw.c["h2v3"] - mu) < 3 * math.sqrt(mu)


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 300)), max_size=60), st.randoms())
@settings(max_examples=200, deadline=None)
def test_order_stable(clicks, rnd):
    base = np.array(clicks, dtype=EVENT_DTYPE)
    shuffled = base.copy()
    idx = list(range(len(clicks)))
    rnd.shuffle(idx)
    shuffled = shuffled[idx]
    a = find_coincidences(sort_events(base), 2, 50)
    b = find_coincidences(sort_events(shuffled), 2, 50)
    assert a == b


def test_correct_counts_examples():
    eta = {k: 0.005 for k in MONITORED}
    eta["h2v3"] = 0.006
    raw = RawCounts({**{k: 0 for k in MONITORED}, "h2v3": 100, "h2v2": 7}, {**{k: 0.0 for k in MONITORED}, "h2v3": 10.0, "h2v2": 7.0})
    out = correct_counts(raw, eta)
    assert out["h2v3"] == pytest.approx(75.0)
    assert out["h2v2"] == 0.0
    uniform = correct_counts(raw, {k: 0.3 for k in MONITORED})
    assert uniform["h2v3"] == pytest.approx(90.0)
    with pytest.raises(ValidationError):
        correct_counts(raw, {**eta, "h3v3": 0.0})


def test_eta_min_over_monitored_pathways():
    # the unmonitored pathways do not influence the normalization
    eta = {k: 0.5 for k in PATHWAYS}
    eta["h3h3"] = 0.01
    raw = RawCounts({**{k: 0 for k in MONITORED}, "h2v3": 10}, {k: 0.0 for k in MONITORED})
    assert correct_counts(raw, eta)["h2v3"] == 10


def test_reduce_to_kappa_examples():
    zero = {k: 0.0 for k in MONITORED}
    assert reduce_to_kappa(zero) == KappaTotals(0, 0, 0, 0)
    assert reduce_to_kappa({**zero, "h2v3": 50, "v2h3": 50}).k_dd == 100
    assert reduce_to_kappa({**zero, "h2h2": 3, "v2v2": 4}).k_ss == 7
    assert reduce_to_kappa({**zero, "h2h3": -3, "v2v3": 1}).k_sd == 1


def test_loss_tolerance():
    src = SourceConfig(duration=10.0, seed=3)
    events = simulate_window(Authentic(), src, rng=window_rng(3, 0))
    eta = src.pathway_efficiency
    full = window_kappa(events, eta)
    packets = encode_packets(events, 1, 0)
    rng = np.random.default_rng(9)
    for trial in range(10):
        k = max(1, int(0.1 * len(packets)))
        drop = set(rng.choice(len(packets), size=k, replace=False).tolist())
        kept = [p.records for i, p in enumerate(packets) if i not in drop]
        dropped = sum(packets[i].record_count for i in drop)
        partial = window_kappa(sort_events(np.concatenate(kept)), eta)
        diff = sum(abs(a - b) for a, b in zip(full.as_tuple(), partial.as_tuple()))
        assert diff <= dropped


def test_end_to_end_unbiased():
    src = SourceConfig(duration=10.0, seed=1).ideal()
    ratios = []
    for w in range(100):
        k = window_kappa(simulate_window(Authentic(math.pi), src, rng=window_rng(1, w)), src.pathway_efficiency)
        ratios.append((k.k_dd - k.k_ds) / (k.k_dd + k.k_ds))
    r = np.array(ratios)
    se = max(r.std(ddof=1), 1e-12) / math.sqrt(r.size)
    assert abs(r.mean() - 1.0) <= 3 * se
