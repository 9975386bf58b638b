"""Detector-node and monitor processes, plus the equivalent in-process pipeline."""

from __future__ import annotations

import json
import logging
import queue
import socket
import sys
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from qseal.coincidence import window_kappa
from qseal.config import RunConfig, scenario_to_json
from qseal.decision import decide
from qseal.estimator import KappaTotals, estimate_correlation
from qseal.simulate import EVENT_DTYPE, simulate_window, window_rng
from qseal.wire import MAX_PACKET_SIZE, PacketError, WindowAssembler, decode_packet, encode_packets

log = logging.getLogger(__name__)


def window_events(cfg: RunConfig, window_id: int) -> np.ndarray:
    """Events the detector node emits for ``window_id`` (deterministic in the seed)."""
    scenario = cfg.schedule.at(window_id)
    t0 = window_id * cfg.wire.window_seconds
    return simulate_window(scenario, cfg.source, cfg.temporal, t0=t0, rng=window_rng(cfg.source.seed, window_id))


def analyze_window(cfg: RunConfig, events: np.ndarray, window_id: int) -> dict:
    """Monitor-side reduction of one window into its alarm-log record."""
    kappa = window_kappa(events, cfg.source.pathway_efficiency, cfg.wire.window_w, cfg.wire.acc_offset)
    return _record(cfg, kappa, window_id)


def _record(cfg: RunConfig, kappa: KappaTotals, window_id: int) -> dict:
    est = estimate_correlation(kappa, window_id)
    verdict = decide(est, cfg.decision)
    return {
        "window_id": window_id,
        "k_sd": kappa.k_sd,
        "k_ss": kappa.k_ss,
        "k_ds": kappa.k_ds,
        "k_dd": kappa.k_dd,
        "e_kappa": est.e_kappa,
        "sigma_kappa": est.sigma_kappa,
        "outcome": verdict.outcome.value,
    }


def run_inprocess(cfg: RunConfig, n_windows: int) -> list[dict]:
    """The monitor pipeline applied directly to simulated windows, with no transport."""
    return [analyze_window(cfg, window_events(cfg, w), w) for w in range(n_windows)]


# -- detector node ---------------------------------------------------------------

def source_packets(cfg: RunConfig, n_windows: int):
    """Yield ``(window_id, n_events, packets)`` with sequence numbers running across windows."""
    seq = 0
    for w in range(n_windows):
        events = window_events(cfg, w)
        packets = encode_packets(events, cfg.wire.node_id, w, first_sequence=seq)
        seq += len(packets)
        yield w, events.size, packets


def run_source(cfg: RunConfig, n_windows: int | None = None, out=None) -> int:
    """Simulate and transmit windows over UDP. Returns a process exit status."""
    out = out or sys.stdout
    n = n_windows if n_windows is not None else (cfg.wire.n_windows or 1)
    addr = (cfg.wire.host, cfg.wire.port)
    failures = 0
    start = time.monotonic()
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        for w, n_events, packets in source_packets(cfg, n):
            window_failed = False
            for p in packets:
                data = p.encode()
                delay = cfg.wire.backoff
                while True:
                    try:
                        # connect() each time so a refused endpoint surfaces as an error
                        sock.connect(addr)
                        sock.send(data)
                        break
                    except OSError as exc:
                        failures += 1
                        window_failed = True
                        log.warning("send failed (%s), attempt %d", exc, failures)
                        if failures >= cfg.wire.send_attempts:
                            print(json.dumps({"error": "endpoint unreachable", "host": addr[0], "port": addr[1]}), file=out)
                            return 2
                        time.sleep(delay)
                        delay *= 2
                if cfg.wire.packet_interval:
                    time.sleep(cfg.wire.packet_interval)
            if not window_failed:
                failures = 0
            print(json.dumps({
                "window_id": w,
                "events": int(n_events),
                "packets": len(packets),
                "scenario": scenario_to_json(cfg.schedule.at(w)),
            }), file=out, flush=True)
            if cfg.wire.realtime:
                lag = start + (w + 1) * cfg.wire.window_seconds - time.monotonic()
                if lag > 0:
                    time.sleep(lag)
    return 0


# -- monitor -----------------------------------------------------------------------

@dataclass
class MonitorStats:
    received: int = 0
    malformed: dict = field(default_factory=dict)
    windows: int = 0
    incomplete: int = 0
    blackouts: int = 0


class Monitor:
    """Receives datagrams, reassembles windows and appends one alarm record per window.

    Reception and analysis run on separate threads joined by an ordered queue,
    so a closed window is analyzed while the next one is being received.
    """

    def __init__(self, cfg: RunConfig, alarm_log=None):
        self.cfg = cfg
        self.stats = MonitorStats()
        self.records: list[dict] = []
        self._assemblers: dict[int, WindowAssembler] = {}
        self._emitted: set[int] = set()
        self._queue: queue.Queue = queue.Queue()
        self._log_path = alarm_log if alarm_log is not None else cfg.output.alarm_log
        self._lock = threading.Lock()
        self._next_window = 0

    # datagram handling is separated from the socket so it can be fuzzed directly
    def handle_datagram(self, data: bytes) -> None:
        self.stats.received += 1
        try:
            packet = decode_packet(data)
        except PacketError as exc:
            self.stats.malformed[exc.code] = self.stats.malformed.get(exc.code, 0) + 1
            return
        asm = self._assemblers.get(packet.node_id)
        if asm is None:
            asm = self._assemblers[packet.node_id] = WindowAssembler(packet.node_id)
        for closed in asm.add(packet):
            self._enqueue(closed.window_id, closed.events, closed.complete)

    def _enqueue(self, window_id, events, complete):
        with self._lock:
            if window_id in self._emitted:
                return
            self._emitted.add(window_id)
            self._next_window = max(self._next_window, window_id + 1)
        if not complete:
            self.stats.incomplete += 1
        self._queue.put((window_id, events))

    def on_timeout(self) -> None:
        """No datagrams for the close timeout: release partial windows, or flag a blackout."""
        flushed = False
        for asm in self._assemblers.values():
            for closed in asm.flush():
                self._enqueue(closed.window_id, closed.events, closed.complete)
                flushed = True
        if not flushed:
            self.stats.blackouts += 1
            self._enqueue(self._next_window, np.empty(0, dtype=EVENT_DTYPE), False)

    def _analyze_loop(self):
        with open(self._log_path, "a") as fh:
            while True:
                item = self._queue.get()
                if item is None:
                    break
                window_id, events = item
                rec = analyze_window(self.cfg, events, window_id)
                self.records.append(rec)
                self.stats.windows += 1
                fh.write(json.dumps(rec) + "\n")
                fh.flush()

    def done(self, n_windows):
        return n_windows is not None and all(w in self._emitted for w in range(n_windows))

    def serve(self, n_windows: int | None = None, stop: threading.Event | None = None,
              ready: threading.Event | None = None, sock: socket.socket | None = None) -> MonitorStats:
        own = sock is None
        if own:
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 8 << 20)
            sock.bind((self.cfg.wire.host, self.cfg.wire.port))
        sock.settimeout(min(0.2, self.cfg.wire.timeout))
        worker = threading.Thread(target=self._analyze_loop, daemon=True)
        worker.start()
        if ready is not None:
            ready.set()
        last = time.monotonic()
        try:
            while not self.done(n_windows) and not (stop is not None and stop.is_set()):
                try:
                    data = sock.recv(MAX_PACKET_SIZE + 1024)
                except socket.timeout:
                    if time.monotonic() - last >= self.cfg.wire.timeout:
                        self.on_timeout()
                        last = time.monotonic()
                    continue
                last = time.monotonic()
                self.handle_datagram(data)
        finally:
            self._queue.put(None)
            worker.join()
            if own:
                sock.close()
        self.records.sort(key=lambda r: r["window_id"])
        return self.stats


def run_monitor(cfg: RunConfig, n_windows: int | None = None, stop=None, ready=None, out=None) -> int:
    out = out or sys.stdout
    mon = Monitor(cfg)
    stats = mon.serve(n_windows if n_windows is not None else cfg.wire.n_windows, stop, ready)
    print(json.dumps({
        "received": stats.received,
        "malformed": stats.malformed,
        "windows": stats.windows,
        "incomplete": stats.incomplete,
        "blackouts": stats.blackouts,
    }), file=out, flush=True)
    return 0
