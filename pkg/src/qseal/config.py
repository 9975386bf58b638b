"""JSON run configuration shared by the detector-node and monitor processes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from qseal.attacks import (
    Authentic,
    Blackout,
    InterceptResend,
    Redirection,
    ShortTimeInjection,
    TamperScenario,
)
from qseal.decision import DecisionConfig, threshold_for_far
from qseal.photonics import BellState, TemporalModel, TwoPhotonState, separable_state
from qseal.simulate import SourceConfig, expected_coincidences


class ConfigError(ValueError):
    pass


# -- scenarios ------------------------------------------------------------------

def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        re, im = v
        return complex(float(re), float(im))
    return complex(v)


def _state_from_json(d: dict) -> TwoPhotonState:
    if "separable" in d:
        s = d["separable"]
        return separable_state(float(s["alpha"]), float(s["beta"]), float(s.get("A", 0.0)), float(s.get("B", 0.0)))
    st = d.get("state", d)
    if isinstance(st, str):
        return BellState(st).state()
    return TwoPhotonState(*(_complex(st.get(k, 0.0)) for k in "abcd")).validate()


def scenario_from_json(d: dict) -> TamperScenario:
    """Decode a tagged-union scenario, e.g. ``{"type": "authentic", "phase": 3.14159}``."""
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError(f"scenario needs a 'type' field: {d!r}")
    kind = d["type"]
    try:
        if kind == "authentic":
            return Authentic(float(d.get("phase", math.pi)))
        if kind == "intercept_resend":
            return InterceptResend(_state_from_json(d))
        if kind == "redirection":
            return Redirection(float(d["t_d"]))
        if kind == "blackout":
            return Blackout()
        if kind == "short_time_injection":
            return ShortTimeInjection(scenario_from_json(d["inner"]), float(d["t"]), float(d.get("phase", math.pi)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} scenario: {exc}") from exc
    raise ConfigError(f"unknown scenario type {kind!r}")


def _pair(z: complex) -> list[float]:
    return [z.real, z.imag]


def scenario_to_json(s: TamperScenario) -> dict:
    if isinstance(s, Authentic):
        return {"type": "authentic", "phase": s.phase}
    if isinstance(s, InterceptResend):
        st = s.state
        return {"type": "intercept_resend", "state": {k: _pair(getattr(st, k)) for k in "abcd"}}
    if isinstance(s, Redirection):
        return {"type": "redirection", "t_d": s.t_d}
    if isinstance(s, Blackout):
        return {"type": "blackout"}
    return {"type": "short_time_injection", "inner": scenario_to_json(s.inner), "t": s.t, "phase": s.phase}


@dataclass(frozen=True)
class Schedule:
    """Scenario per window: ``initial`` until the first ``(start_window, scenario)`` switch."""

    initial: TamperScenario = Authentic()
    switches: tuple = ()

    def __post_init__(self):
        starts = [w for w, _ in self.switches]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("schedule windows must be strictly increasing")

    def at(self, window_id: int) -> TamperScenario:
        current = self.initial
        for start, scenario in self.switches:
            if window_id >= start:
                current = scenario
        return current


# -- run configuration ---------------------------------------------------------

@dataclass(frozen=True)
class WireConfig:
    host: str = "127.0.0.1"
    port: int = 47474
    window_seconds: float = 10.0
    n_windows: int | None = None
    node_id: int = 1
    window_w: int = 2
    acc_offset: int = 10_000
    realtime: bool = False
    packet_interval: float = 0.0
    send_attempts: int = 5
    backoff: float = 0.1
    close_timeout: float | None = None  # defaults to 2 * window_seconds

    def __post_init__(self):
        if not self.window_seconds > 0:
            raise ConfigError("window_seconds must be positive")
        if not 0 <= self.node_id <= 255:
            raise ConfigError("node_id must fit in one byte")

    @property
    def timeout(self) -> float:
        return 2.0 * self.window_seconds if self.close_timeout is None else self.close_timeout


@dataclass(frozen=True)
class OutputConfig:
    alarm_log: str = "alarms.jsonl"


@dataclass(frozen=True)
class RunConfig:
    source: SourceConfig = field(default_factory=SourceConfig)
    schedule: Schedule = field(default_factory=Schedule)
    temporal: TemporalModel = field(default_factory=TemporalModel)
    wire: WireConfig = field(default_factory=WireConfig)
    decision: DecisionConfig = field(default_factory=lambda: DecisionConfig(epsilon=None))
    output: OutputConfig = field(default_factory=OutputConfig)


def _pick(cls, d: dict, section: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    return dict(d)


def _decision_from_json(d: dict, source: SourceConfig, schedule: Schedule, temporal: TemporalModel) -> DecisionConfig:
    d = dict(d)
    target_far = float(d.pop("target_far", 1e-9))
    base = DecisionConfig(epsilon=None, **_pick(DecisionConfig, {k: v for k, v in d.items() if k != "epsilon"}, "decision"))
    eps = d.get("epsilon")
    if eps is None:
        eps = max(threshold_for_far(base.e1, base.sigma, target_far), base.e0)
    if "min_coincidences" not in d:
        # count-starvation floor: a tenth of what an authentic window should give
        expected = expected_coincidences(Authentic(), source, temporal)
        base = replace(base, min_coincidences=0.1 * expected)
    return base.with_epsilon(float(eps))


def config_from_dict(raw: dict[str, Any]) -> RunConfig:
    raw = dict(raw)
    unknown = set(raw) - {"source", "scenario", "temporal", "wire", "decision", "output"}
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    try:
        wire = WireConfig(**_pick(WireConfig, raw.get("wire", {}), "wire"))
        src = dict(raw.get("source", {}))
        src.setdefault("duration", wire.window_seconds)
        source = SourceConfig(**_pick(SourceConfig, src, "source"))
        temporal = TemporalModel(**_pick(TemporalModel, raw.get("temporal", {}), "temporal"))

        sc = dict(raw.get("scenario", {"type": "authentic"}))
        switches = tuple(
            (int(entry["start_window"]), scenario_from_json(entry["scenario"])) for entry in sc.pop("schedule", [])
        )
        schedule = Schedule(scenario_from_json(sc), switches)
        decision = _decision_from_json(raw.get("decision", {}), source, schedule, temporal)
        output = OutputConfig(**_pick(OutputConfig, raw.get("output", {}), "output"))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return RunConfig(source, schedule, temporal, wire, decision, output)


def load_config(path: str | Path, **overrides) -> RunConfig:
    """Read a JSON config; ``overrides`` are ``section__key=value`` pairs (e.g. ``wire__port=5000``)."""
    with open(path) as fh:
        raw = json.load(fh)
    for key, value in overrides.items():
        if value is None:
            continue
        section, name = key.split("__", 1)
        raw.setdefault(section, {})[name] = value
    return config_from_dict(raw)
