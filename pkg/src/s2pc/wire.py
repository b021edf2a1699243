"""Framing, metered links and the run transcript.

Frame layout: 1-byte tag, 4-byte big-endian payload length, payload.
Ring elements in a payload are row-major, each ``ceil(l_q / 8)`` bytes of
the ``[0, q)`` representative. Key-refresh frames are the fixed 25-byte
layout of :func:`s2pc.sharing.encode_key_refresh`.
"""
from __future__ import annotations

import hashlib
import queue
import struct
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .ring import element_bytes, mod_reduce
from .sharing import KEY_REFRESH_TAG

_HDR = struct.Struct(">BI")


class Tag(IntEnum):
    Y_SHARES = 0x01
    AUX = 0x02
    U_SHARE = 0x03
    MULT_OPEN = 0x04
    TRUNC_OPEN = 0x05
    KEY_REFRESH = KEY_REFRESH_TAG
    PARAMS = 0x07
    TRUNC_PUBLIC = 0x08


class ChannelError(RuntimeError):
    pass


def encode_elements(values, q: int) -> bytes:
    w = element_bytes(q)
    return b"".join((int(v) % q).to_bytes(w, "big") for v in np.ravel(np.asarray(values, dtype=object)))


def decode_elements(payload: bytes, q: int) -> list[int]:
    w = element_bytes(q)
    if len(payload) % w:
        raise ChannelError("payload is not a whole number of ring elements")
    out = []
    for i in range(0, len(payload), w):
        v = int.from_bytes(payload[i:i + w], "big")
        if v >= q:
            raise ChannelError("ring element out of range")
        out.append(mod_reduce(v, q))
    return out


def encode_signed(values, bits: int) -> bytes:
    """Two's-complement ``bits``-wide integers, ``ceil(bits/8)`` bytes each."""
    w = (bits + 7) // 8
    mask = (1 << bits) - 1
    return b"".join((int(v) & mask).to_bytes(w, "big") for v in values)


def decode_signed(payload: bytes, bits: int) -> list[int]:
    w = (bits + 7) // 8
    out = []
    for i in range(0, len(payload), w):
        v = int.from_bytes(payload[i:i + w], "big")
        out.append(v - (1 << bits) if v >= 1 << (bits - 1) else v)
    return out


def frame(tag: int, payload: bytes) -> bytes:
    return _HDR.pack(int(tag), len(payload)) + payload


def parse_frames(data: bytes) -> list[tuple[Tag, bytes]]:
    out = []
    i = 0
    while i < len(data):
        tag = data[i]
        if tag == KEY_REFRESH_TAG:
            out.append((Tag.KEY_REFRESH, data[i:i + 25]))
            i += 25
            continue
        if i + _HDR.size > len(data):
            raise ChannelError("truncated frame header")
        _, length = _HDR.unpack_from(data, i)
        i += _HDR.size
        if i + length > len(data):
            raise ChannelError("truncated frame payload")
        out.append((Tag(tag), data[i:i + length]))
        i += length
    return out


@dataclass
class Meter:
    """Per-link accounting of what actually crossed the wire."""

    messages: int = 0
    wire_bytes: int = 0
    ring_elements: int = 0
    other_payload_bits: int = 0
    by_tag: dict = field(default_factory=dict)

    def charge(self, data: bytes, q: int, ell: int | None) -> None:
        self.messages += 1
        self.wire_bytes += len(data)
        w = element_bytes(q)
        for tag, payload in parse_frames(data):
            self.by_tag[tag.name] = self.by_tag.get(tag.name, 0) + len(payload)
            if tag == Tag.KEY_REFRESH:
                self.other_payload_bits += 8 * (len(payload) - 1)
            elif tag == Tag.TRUNC_PUBLIC:
                # costed at ell bits per public value
                self.other_payload_bits += ell * (len(payload) // ((ell + 7) // 8))
            else:
                self.ring_elements += len(payload) // w

    def payload_bits(self, lq: int) -> int:
        return self.ring_elements * lq + self.other_payload_bits

    def snapshot(self) -> "Meter":
        return Meter(self.messages, self.wire_bytes, self.ring_elements, self.other_payload_bits, dict(self.by_tag))

    def __sub__(self, other: "Meter") -> "Meter":
        tags = {k: self.by_tag.get(k, 0) - other.by_tag.get(k, 0) for k in self.by_tag}
        return Meter(
            self.messages - other.messages,
            self.wire_bytes - other.wire_bytes,
            self.ring_elements - other.ring_elements,
            self.other_payload_bits - other.other_payload_bits,
            {k: v for k, v in tags.items() if v},
        )


class Transcript:
    """Every message of a run, keyed by (step, link, sequence number).

    The canonical serialization sorts on that key, so a threaded run and a
    single-threaded run of the same seed serialize identically.
    """

    def __init__(self):
        self._records: list[tuple[int, str, int, bytes]] = []
        self._lock = threading.Lock()
        self.u_hat: dict[int, list] = {}
        self.probes: dict[int, dict] = {}

    def record(self, step: int, link: str, seq: int, data: bytes) -> None:
        with self._lock:
            self._records.append((step, link, seq, data))

    def records(self) -> list[tuple[int, str, int, bytes]]:
        return sorted(self._records, key=lambda r: (r[0], r[1], r[2]))

    def to_bytes(self) -> bytes:
        out = bytearray()
        for step, link, seq, data in self.records():
            name = link.encode()
            out += struct.pack(">qB", step, len(name)) + name + struct.pack(">II", seq, len(data)) + data
        return bytes(out)

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def step_bytes(self, step: int) -> dict[str, int]:
        out: dict[str, int] = {}
        for s, link, _, data in self._records:
            if s == step:
                out[link] = out.get(link, 0) + len(data)
        return out


class Link:
    """One direction between two roles. Meters and records every send."""

    def __init__(self, name: str, q: int, ell: int | None = None, transcript: Transcript | None = None, threaded: bool = False):
        self.name = name
        self.q = q
        self.ell = ell
        self.meter = Meter()
        self.transcript = transcript
        self._seq = 0
        self._step = -1
        self._queue: queue.Queue | deque = queue.Queue() if threaded else deque()
        self.threaded = threaded
        self.closed = False

    def ready(self) -> bool:
        return not self._queue.empty() if self.threaded else bool(self._queue)

    def send(self, data: bytes, step: int = -1) -> None:
        if self.closed:
            raise ChannelError(f"link {self.name} is closed")
        if step != self._step:
            self._step, self._seq = step, 0
        self.meter.charge(data, self.q, self.ell)
        if self.transcript is not None:
            self.transcript.record(step, self.name, self._seq, data)
        self._seq += 1
        if self.threaded:
            self._queue.put(data)
        else:
            self._queue.append(data)

    def recv(self, timeout: float | None = 30.0) -> bytes:
        if self.threaded:
            try:
                return self._queue.get(timeout=timeout)
            except queue.Empty:
                raise ChannelError(f"timed out waiting on {self.name}") from None
        if not self._queue:
            raise ChannelError(f"nothing to receive on {self.name}")
        return self._queue.popleft()

    def recv_frames(self, expect: Tag | None = None) -> list[tuple[Tag, bytes]]:
        frames = parse_frames(self.recv())
        if expect is not None and (not frames or frames[0][0] != expect):
            got = frames[0][0].name if frames else "nothing"
            raise ChannelError(f"{self.name}: expected {expect.name}, got {got}")
        return frames


class Channel:
    """The two directions between P1 and P2."""

    def __init__(self, q: int, ell: int | None = None, transcript: Transcript | None = None, threaded: bool = False):
        self.p1_to_p2 = Link("p1->p2", q, ell, transcript, threaded)
        self.p2_to_p1 = Link("p2->p1", q, ell, transcript, threaded)

    def outgoing(self, i: int) -> Link:
        return self.p1_to_p2 if i == 1 else self.p2_to_p1

    def incoming(self, i: int) -> Link:
        return self.p2_to_p1 if i == 1 else self.p1_to_p2

    @property
    def ring_elements(self) -> int:
        return self.p1_to_p2.meter.ring_elements + self.p2_to_p1.meter.ring_elements
