"""Coincidence finding, accidental subtraction and reduction to coincidence-type totals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from qseal.estimator import KappaTotals
from qseal.photonics import ValidationError
from qseal.simulate import CHANNELS, EVENT_DTYPE

MONITORED = ("h2h3", "v2v3", "h2h2", "v2v2", "h2v2", "h3v3", "h2v3", "v2h3")

DEFAULT_WINDOW = 2
DEFAULT_ACC_OFFSET = 10_000

# channel id -> (polarization, port); h2a and h2b both read as "h2"
_CHANNEL_MODE = {cid: (label[0], label[1]) for cid, label in CHANNELS.items()}

# channel groups whose mutual coincidences make up each pathway
_PATHWAY_GROUPS = {
    "h2h3": ((0, 1), (4,)),
    "v2v3": ((2, 3), (5,)),
    "h2h2": ((0,), (1,)),
    "v2v2": ((2,), (3,)),
    "h2v2": ((0, 1), (2, 3)),
    "h3v3": ((4,), (5,)),
    "h2v3": ((0, 1), (5,)),
    "v2h3": ((2, 3), (4,)),
}


def classify(ch_a: int, ch_b: int) -> str | None:
    """Pathway label of a two-channel coincidence, or None if it is not a pathway."""
    if ch_a == ch_b or ch_a not in _CHANNEL_MODE or ch_b not in _CHANNEL_MODE:
        return None
    (pa, qa), (pb, qb) = _CHANNEL_MODE[ch_a], _CHANNEL_MODE[ch_b]
    if qa > qb or (qa == qb and pa > pb):
        (pa, qa), (pb, qb) = (pb, qb), (pa, qa)
    if pa == pb:
        return f"{pa}{qa}{pb}{qb}"  # h2h3, v2v3, h2h2, v2v2
    if qa == qb:
        return f"h{qa}v{qa}"        # h2v2, h3v3
    return f"{pa}2{pb}3"            # h2v3, v2h3


@dataclass
class RawCounts:
    c: dict[str, int] = field(default_factory=lambda: {k: 0 for k in MONITORED})
    c_acc: dict[str, float] = field(default_factory=lambda: {k: 0.0 for k in MONITORED})


def _as_events(events) -> np.ndarray:
    if isinstance(events, np.ndarray) and events.dtype == EVENT_DTYPE:
        return events
    arr = np.array([(e.channel, e.tick) if hasattr(e, "tick") else tuple(e) for e in events], dtype=EVENT_DTYPE)
    return arr


def sort_events(events) -> np.ndarray:
    """Canonical event order: by tick, then channel."""
    ev = _as_events(events)
    return ev[np.lexsort((ev["channel"], ev["tick"]))]


def pair_clicks(channels: np.ndarray, ticks: np.ndarray, window_w: int) -> list[tuple[int, int]]:
    """Greedy earliest-first pairing of clicks on distinct channels within ``window_w`` ticks.

    Returns index pairs into the (tick-sorted) input.
    """
    n = ticks.size
    if n < 2:
        return []
    t = ticks.astype(np.int64) if ticks.dtype != np.int64 else ticks
    # only runs of clicks separated by at most window_w can contain pairs
    close = np.diff(t) <= window_w
    if not close.any():
        return []
    pairs = []
    starts = np.flatnonzero(close & ~np.concatenate(([False], close[:-1])))
    for s in starts:
        e = s + 1
        while e < n - 1 and close[e]:
            e += 1
        used = set()
        for i in range(s, e + 1):
            if i in used:
                continue
            for j in range(i + 1, e + 1):
                if t[j] - t[i] > window_w:
                    break
                if j not in used and channels[j] != channels[i]:
                    used.add(i)
                    used.add(j)
                    pairs.append((i, j))
                    break
    return pairs


def _count(channels, ticks, window_w, only=None) -> dict[str, int]:
    counts = {k: 0 for k in MONITORED}
    for i, j in pair_clicks(channels, ticks, window_w):
        label = classify(int(channels[i]), int(channels[j]))
        if label is not None and (only is None or label == only):
            counts[label] += 1
    return counts


def _check_sorted(ticks):
    if ticks.size > 1 and np.any(np.diff(ticks.astype(np.int64)) < 0):
        raise ValidationError("events must be sorted by tick")


def accidental_counts(events, window_w: int = DEFAULT_WINDOW, acc_offset: int = DEFAULT_ACC_OFFSET) -> dict[str, float]:
    """Delayed-window accidental estimate per pathway.

    For each pathway the second channel group is delayed by ``acc_offset``
    ticks, which destroys true pair correlations, and the coincidence finder
    is re-run on the two groups.
    """
    ev = _as_events(events)
    out = {}
    for label, (g1, g2) in _PATHWAY_GROUPS.items():
        a = ev[np.isin(ev["channel"], g1)]
        b = ev[np.isin(ev["channel"], g2)]
        merged = np.empty(a.size + b.size, dtype=[("channel", "u1"), ("tick", "i8")])
        merged["channel"][: a.size] = a["channel"]
        merged["tick"][: a.size] = a["tick"].astype(np.int64)
        merged["channel"][a.size:] = b["channel"]
        merged["tick"][a.size:] = b["tick"].astype(np.int64) + acc_offset
        merged = merged[np.lexsort((merged["channel"], merged["tick"]))]
        out[label] = float(_count(merged["channel"], merged["tick"], window_w, only=label)[label])
    return out


def find_coincidences(events, window_w: int = DEFAULT_WINDOW, acc_offset: int = DEFAULT_ACC_OFFSET) -> RawCounts:
    """Raw coincidence counts and accidental estimates per monitored pathway."""
    if window_w < 1:
        raise ValidationError("coincidence window must be at least one tick")
    if acc_offset <= window_w:
        raise ValidationError("accidental offset must exceed the coincidence window")
    ev = _as_events(events)
    _check_sorted(ev["tick"])
    c = _count(ev["channel"], ev["tick"].astype(np.int64), window_w)
    return RawCounts(c, accidental_counts(ev, window_w, acc_offset))


def correct_counts(raw: RawCounts, eta: Mapping[str, float]) -> dict[str, float]:
    """Accidental-subtracted, efficiency-equalized counts ``(eta_min/eta_i)(c_i - c_acc)``."""
    effs = {k: float(eta[k]) for k in MONITORED}
    if any(not (0.0 < v <= 1.0) or not math.isfinite(v) for v in effs.values()):
        raise ValidationError("pathway efficiencies must lie in (0, 1]")
    eta_min = min(effs.values())
    return {k: (eta_min / effs[k]) * (raw.c[k] - raw.c_acc.get(k, 0.0)) for k in MONITORED}


def reduce_to_kappa(corrected: Mapping[str, float]) -> KappaTotals:
    """Sum corrected pathway counts into coincidence-type totals; negative counts clamp to zero."""
    c = {k: max(float(corrected.get(k, 0.0)), 0.0) for k in MONITORED}
    return KappaTotals(
        k_sd=c["h2h3"] + c["v2v3"],
        k_ss=c["h2h2"] + c["v2v2"],
        k_ds=c["h2v2"] + c["h3v3"],
        k_dd=c["h2v3"] + c["v2h3"],
    )


def window_kappa(events, eta, window_w: int = DEFAULT_WINDOW, acc_offset: int = DEFAULT_ACC_OFFSET) -> KappaTotals:
    """Full monitor reduction of one window of sorted events."""
    return reduce_to_kappa(correct_counts(find_coincidences(events, window_w, acc_offset), eta))
