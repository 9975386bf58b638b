"""Datagram framing of detection events.

Packet layout (all multi-byte fields big-endian)::

    offset  size  field
    0       4     magic "QSL1"
    4       1     version (1)
    5       1     node_id
    6       1     flags (bit0: end of window)
    7       2     record_count (<= 1000)
    9       4     sequence (per node, consecutive from 0)
    13      4     window_id
    17      9*n   records: channel (1 byte), tick (8 bytes)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from qseal.simulate import EVENT_DTYPE

MAGIC = b"QSL1"
VERSION = 1
FLAG_END_OF_WINDOW = 0x01
MAX_RECORDS = 1000

HEADER = struct.Struct(">4sBBBHII")
HEADER_SIZE = HEADER.size  # 17
RECORD_DTYPE = np.dtype([("channel", "u1"), ("tick", ">u8")])
RECORD_SIZE = RECORD_DTYPE.itemsize  # 9
MAX_PACKET_SIZE = HEADER_SIZE + MAX_RECORDS * RECORD_SIZE  # 9017


class PacketError(ValueError):
    code = "packet"


class MagicError(PacketError):
    code = "bad_magic"


class VersionError(PacketError):
    code = "bad_version"


class TruncationError(PacketError):
    code = "truncated"


class RecordCountError(PacketError):
    code = "record_count"


@dataclass
class EventPacket:
    node_id: int
    sequence: int
    window_id: int
    records: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=EVENT_DTYPE))
    flags: int = 0
    version: int = VERSION

    @property
    def record_count(self) -> int:
        return int(self.records.size)

    @property
    def end_of_window(self) -> bool:
        return bool(self.flags & FLAG_END_OF_WINDOW)

    def __eq__(self, other):
        if not isinstance(other, EventPacket):
            return NotImplemented
        return (
            (self.node_id, self.sequence, self.window_id, self.flags, self.version)
            == (other.node_id, other.sequence, other.window_id, other.flags, other.version)
            and self.records.size == other.records.size
            and np.array_equal(self.records["channel"], other.records["channel"])
            and np.array_equal(self.records["tick"], other.records["tick"])
        )

    def encode(self) -> bytes:
        n = self.record_count
        if n > MAX_RECORDS:
            raise RecordCountError(f"{n} records exceed the {MAX_RECORDS} record limit")
        recs = np.empty(n, dtype=RECORD_DTYPE)
        recs["channel"] = self.records["channel"]
        recs["tick"] = self.records["tick"]
        head = HEADER.pack(MAGIC, self.version, self.node_id, self.flags, n, self.sequence, self.window_id)
        return head + recs.tobytes()


def decode_packet(data: bytes) -> EventPacket:
    """Parse one datagram; raises a :class:`PacketError` subclass on malformed input."""
    if len(data) < HEADER_SIZE:
        if not MAGIC.startswith(bytes(data[:4])):
            raise MagicError("bad magic")
        raise TruncationError(f"{len(data)} bytes is shorter than the header")
    magic, version, node_id, flags, count, seq, window_id = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"unsupported version {version}")
    if count > MAX_RECORDS:
        raise RecordCountError(f"record_count {count} exceeds {MAX_RECORDS}")
    body = len(data) - HEADER_SIZE
    if body < count * RECORD_SIZE:
        raise TruncationError(f"expected {count} records, got {body} bytes")
    if body != count * RECORD_SIZE:
        raise RecordCountError(f"{body} body bytes do not match record_count {count}")
    raw = np.frombuffer(data, dtype=RECORD_DTYPE, count=count, offset=HEADER_SIZE)
    records = np.empty(count, dtype=EVENT_DTYPE)
    records["channel"] = raw["channel"]
    records["tick"] = raw["tick"]
    return EventPacket(node_id, seq, window_id, records, flags, version)


def encode_packets(events, node_id: int, window_id: int, first_sequence: int = 0) -> list[EventPacket]:
    """Split one window of time-ordered events into packets; the last one carries the end flag."""
    ev = np.asarray(events, dtype=EVENT_DTYPE) if not isinstance(events, np.ndarray) else events
    chunks = [ev[i:i + MAX_RECORDS] for i in range(0, ev.size, MAX_RECORDS)] or [ev[:0]]
    packets = []
    for i, chunk in enumerate(chunks):
        flags = FLAG_END_OF_WINDOW if i == len(chunks) - 1 else 0
        packets.append(EventPacket(node_id, (first_sequence + i) & 0xFFFFFFFF, window_id, chunk.copy(), flags))
    return packets


@dataclass
class ClosedWindow:
    node_id: int
    window_id: int
    events: np.ndarray
    complete: bool
    packets: int
    missing: int = 0


class WindowAssembler:
    """Reassembles one node's datagrams into whole windows.

    Sequence numbers are consecutive per node, so a window is complete once
    its end-of-window packet and every sequence number since the previous
    window's end have arrived. Incomplete windows are released by
    :meth:`flush` (the caller's timeout).
    """

    def __init__(self, node_id: int):
        self.node_id = node_id
        self._pending: dict[int, dict[int, EventPacket]] = {}
        self._end_seq: dict[int, int] = {}
        self._last_end = -1  # sequence of the previous window's end marker
        self._closed: set[int] = set()
        self.out_of_order = 0
        self.duplicates = 0
        self._highest = -1  # highest sequence seen, for reordering statistics

    def add(self, packet: EventPacket) -> list[ClosedWindow]:
        if packet.window_id in self._closed:
            self.duplicates += 1
            return []
        slot = self._pending.setdefault(packet.window_id, {})
        if packet.sequence in slot:
            self.duplicates += 1
            return []
        if packet.sequence < self._highest:
            self.out_of_order += 1
        self._highest = max(self._highest, packet.sequence)
        slot[packet.sequence] = packet
        if packet.end_of_window:
            self._end_seq[packet.window_id] = packet.sequence
        return self._release_complete()

    def _release_complete(self) -> list[ClosedWindow]:
        done = []
        for wid in sorted(self._end_seq):
            expected = range(self._last_end + 1, self._end_seq[wid] + 1)
            if set(self._pending.get(wid, {})) != set(expected):
                break
            done.append(self._close(wid, complete=True))
        return done

    def _close(self, wid: int, complete: bool) -> ClosedWindow:
        slot = self._pending.pop(wid, {})
        end = self._end_seq.pop(wid, None)
        if end is not None:
            self._last_end = max(self._last_end, end)
        else:
            self._last_end = max([self._last_end, *slot])
        self._closed.add(wid)
        packets = [slot[s] for s in sorted(slot)]
        events = np.concatenate([p.records for p in packets]) if packets else np.empty(0, dtype=EVENT_DTYPE)
        events = events[np.lexsort((events["channel"], events["tick"]))]
        missing = 0
        if end is not None and slot:
            missing = max(0, end - min(slot) + 1 - len(slot))
        return ClosedWindow(self.node_id, wid, events, complete, len(packets), missing)

    @property
    def pending_windows(self) -> list[int]:
        return sorted(self._pending)

    def flush(self, window_id: int | None = None) -> list[ClosedWindow]:
        """Close pending windows (all, or those up to ``window_id``) regardless of completeness."""
        closed = []
        for w in sorted(self._pending):
            if window_id is not None and w > window_id:
                break
            if w not in self._pending:
                continue  # released as complete once an earlier window was closed
            closed.append(self._close(w, complete=False))
            closed += self._release_complete()
        return closed


def iter_datagrams(packets: Iterable[EventPacket]) -> Iterator[bytes]:
    for p in packets:
        yield p.encode()
