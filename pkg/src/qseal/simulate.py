"""Monte-Carlo detection events for one sampling window.

Detector layout (channel id -> label)::

    0 h2a   1 h2b   2 v2a   3 v2b   4 h3   5 v3   6, 7 unused

Port 2 is split by a 50:50 beamsplitter after the polarizer so that
same-port same-polarization pairs can be registered as a two-channel
coincidence. Port 3 has one detector per polarization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from qseal.attacks import (
    Authentic,
    Redirection,
    ShortTimeInjection,
    TamperScenario,
    effective_statistics,
)
from qseal.photonics import PATHWAYS, TemporalModel, ValidationError

CHANNELS = {0: "h2a", 1: "h2b", 2: "v2a", 3: "v2b", 4: "h3", 5: "v3"}
CHANNEL_IDS = {label: cid for cid, label in CHANNELS.items()}
ACTIVE_CHANNELS = tuple(CHANNELS)
N_CHANNELS = 8

EVENT_DTYPE = np.dtype([("channel", "u1"), ("tick", "u8")])

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_GROUP_INDEX = 1.47

# Joint pathway efficiencies spanning the 5-6e-3 range of the prototype.
DEFAULT_EFFICIENCY = {
    "h2h3": 5.4e-3, "v2v3": 5.2e-3,
    "h2h2": 5.6e-3, "h3h3": 5.5e-3, "v2v2": 5.3e-3, "v3v3": 5.1e-3,
    "h2v2": 5.0e-3, "h3v3": 5.7e-3,
    "h2v3": 6.0e-3, "v2h3": 5.8e-3,
}

# (polarization, port) of the two photons of each pathway
_PATHWAY_PHOTONS = {k: ((k[0], k[1]), (k[2], k[3])) for k in PATHWAYS}


@dataclass(frozen=True)
class DetectionEvent:
    channel: int
    tick: int


@dataclass(frozen=True)
class SourceConfig:
    """Source and detector parameters, losses included.

    ``visibility`` is the fraction of source pairs that two-photon interfere;
    the rest behave as temporally distinguishable. ``background_rate`` adds
    uncorrelated singles per channel, standing in for photons whose partner
    was lost.
    """

    pair_rate: float = 1e4
    pathway_efficiency: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_EFFICIENCY))
    dark_rate: float = 100.0
    background_rate: float = 0.0
    jitter_sigma: float = 0.0
    clock_tick: float = 10e-9
    duration: float = 10.0
    seed: int = 0
    visibility: float = 0.8

    def __post_init__(self):
        eff = dict(DEFAULT_EFFICIENCY)
        eff.update({k: float(v) for k, v in dict(self.pathway_efficiency).items()})
        unknown = set(eff) - set(PATHWAYS)
        if unknown:
            raise ValidationError(f"unknown pathways {sorted(unknown)}")
        if any(not 0.0 < v <= 1.0 for v in eff.values()):
            raise ValidationError("pathway efficiencies must lie in (0, 1]")
        object.__setattr__(self, "pathway_efficiency", eff)
        if self.pair_rate < 0 or self.dark_rate < 0 or self.background_rate < 0:
            raise ValidationError("rates must be non-negative")
        if not self.clock_tick > 0:
            raise ValidationError("clock_tick must be positive")
        if not self.duration > 0:
            raise ValidationError("duration must be positive")
        if self.jitter_sigma < 0:
            raise ValidationError("jitter_sigma must be non-negative")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValidationError("visibility must lie in [0, 1]")

    def efficiency_vector(self) -> np.ndarray:
        return np.array([self.pathway_efficiency[k] for k in PATHWAYS])

    def ideal(self) -> "SourceConfig":
        """Same source with every noise term (dark counts, background, jitter, dephasing) switched off."""
        return replace(self, dark_rate=0.0, background_rate=0.0, jitter_sigma=0.0, visibility=1.0)


@dataclass
class WindowSample:
    """Events of one window together with the ground truth that produced them."""

    events: np.ndarray        # EVENT_DTYPE, sorted by (tick, channel)
    pair_times: np.ndarray    # emission times of surviving pairs (s)
    pair_pathways: np.ndarray  # index into PATHWAYS per surviving pair


def delay_from_length(delta_length: float, group_index: float = DEFAULT_GROUP_INDEX) -> float:
    """Relative delay (s) from a one-way fiber length change (m)."""
    return delta_length * group_index / SPEED_OF_LIGHT


def length_from_delay(t_d: float, group_index: float = DEFAULT_GROUP_INDEX) -> float:
    return t_d * SPEED_OF_LIGHT / group_index


def _segments(scenario, duration):
    """Split a window into (start, length, scenario) pieces with constant statistics."""
    if isinstance(scenario, ShortTimeInjection):
        if scenario.t > duration:
            raise ValidationError("injection longer than the window")
        pieces = []
        if scenario.t > 0:
            pieces.append((0.0, scenario.t, scenario.inner))
        if scenario.t < duration:
            pieces.append((scenario.t, duration - scenario.t, Authentic(scenario.phase)))
        return pieces
    return [(0.0, duration, scenario)]


def sample_pairs(
    scenario: TamperScenario,
    source: SourceConfig,
    temporal: TemporalModel,
    rng: np.random.Generator,
    t0: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Emission times, pathway indices and active-photon delays of the surviving pairs."""
    eff = source.efficiency_vector()
    times, paths, delays = [], [], []
    for start, length, piece in _segments(scenario, source.duration):
        stats = effective_statistics(piece, temporal, source.duration, source.visibility)
        rate = source.pair_rate * stats.pair_rate_scale
        n = rng.poisson(rate * length) if rate > 0 else 0
        t = t0 + start + length * rng.random(n)
        p = stats.probs.pathway_vector()
        p = np.clip(p, 0.0, None)
        k = rng.choice(len(PATHWAYS), size=n, p=p / p.sum())
        alive = rng.random(n) < eff[k]
        times.append(t[alive])
        paths.append(k[alive])
        t_d = piece.t_d if isinstance(piece, Redirection) else 0.0
        delays.append(np.full(int(alive.sum()), t_d))
    times = np.concatenate(times)
    paths = np.concatenate(paths).astype(np.int64)
    delays = np.concatenate(delays)
    order = np.argsort(times, kind="stable")
    return times[order], paths[order], delays[order]


def _route(pol_port, rng, n):
    """Channel ids for ``n`` photons of one (polarization, port)."""
    pol, port = pol_port
    if port == "3":
        return np.full(n, CHANNEL_IDS[pol + "3"], dtype=np.uint8)
    base = CHANNEL_IDS[pol + "2a"]
    return (base + (rng.random(n) < 0.5)).astype(np.uint8)


def simulate_window_sample(
    scenario: TamperScenario,
    source: SourceConfig,
    temporal: TemporalModel = TemporalModel(),
    t0: float = 0.0,
    rng: np.random.Generator | None = None,
) -> WindowSample:
    if rng is None:
        rng = np.random.default_rng(source.seed)
    times, paths, delays = sample_pairs(scenario, source, temporal, rng, t0)
    n = len(times)

    ch1 = np.empty(n, dtype=np.uint8)
    ch2 = np.empty(n, dtype=np.uint8)
    for idx, name in enumerate(PATHWAYS):
        sel = np.flatnonzero(paths == idx)
        if sel.size == 0:
            continue
        first, second = _PATHWAY_PHOTONS[name]
        ch1[sel] = _route(first, rng, sel.size)
        ch2[sel] = _route(second, rng, sel.size)

    # the active photon is either one of the pair with equal chance
    shift = np.round(delays / source.clock_tick) * source.clock_tick
    t1 = times.copy()
    t2 = times.copy()
    if np.any(shift != 0):
        second_active = rng.random(n) < 0.5
        t1 = t1 + np.where(second_active, 0.0, shift)
        t2 = t2 + np.where(second_active, shift, 0.0)

    # a non-number-resolving detector hit by both photons clicks once
    both = ch1 != ch2
    chans = [ch1, ch2[both]]
    stamps = [t1, t2[both]]

    noise_rate = source.dark_rate + source.background_rate
    for cid in ACTIVE_CHANNELS:
        m = rng.poisson(noise_rate * source.duration) if noise_rate > 0 else 0
        chans.append(np.full(m, cid, dtype=np.uint8))
        stamps.append(t0 + source.duration * rng.random(m))

    ch = np.concatenate(chans)
    ts = np.concatenate(stamps)
    if source.jitter_sigma > 0:
        ts = ts + rng.normal(0.0, source.jitter_sigma, ts.size)
    ticks = np.floor(np.clip(ts, 0.0, None) / source.clock_tick).astype(np.uint64)

    events = np.empty(ch.size, dtype=EVENT_DTYPE)
    events["channel"] = ch
    events["tick"] = ticks
    events = events[np.lexsort((events["channel"], events["tick"]))]
    return WindowSample(events, times, paths)


def simulate_window(
    scenario: TamperScenario,
    source: SourceConfig,
    temporal: TemporalModel = TemporalModel(),
    t0: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Time-ordered detection events (``EVENT_DTYPE``) for one window.

    Deterministic given ``source.seed`` (or the supplied generator).
    """
    return simulate_window_sample(scenario, source, temporal, t0, rng).events


def window_rng(seed: int, window_id: int) -> np.random.Generator:
    """Independent, reproducible generator for window ``window_id`` of a run."""
    return np.random.default_rng([int(seed), int(window_id)])


def expected_coincidences(scenario: TamperScenario, source: SourceConfig, temporal: TemporalModel = TemporalModel()) -> float:
    """Expected number of two-channel coincidences per window from correlated pairs."""
    eff = source.efficiency_vector()
    total = 0.0
    for _, length, piece in _segments(scenario, source.duration):
        stats = effective_statistics(piece, temporal, source.duration, source.visibility)
        p = stats.probs.pathway_vector()
        # port-3 same-polarization pairs are one click; port-2 ones register half the time
        seen = np.array([0.5 if k in ("h2h2", "v2v2") else 0.0 if k in ("h3h3", "v3v3") else 1.0 for k in PATHWAYS])
        total += source.pair_rate * stats.pair_rate_scale * length * float(np.sum(p * eff * seen))
    return total
