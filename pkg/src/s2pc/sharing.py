"""2-out-of-2 additive secret sharing over Z_q.

``SharePair`` and ``ShareMatrix`` are the joint (harness/dealer) view of a
sharing. Protocol parties only ever hold one side, as plain ints or object
arrays.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .prg import DeterministicRng, PrfKey
from .ring import ModulusMismatchError, mod_reduce

__all__ = [
    "SharePair",
    "ShareMatrix",
    "share",
    "reconst",
    "share_add_const",
    "share_sub_const",
    "share_mul_const",
    "share_add",
    "share_sub",
    "share_matrix",
    "reconst_matrix",
    "share_vector_local",
    "prf_share",
    "KEY_REFRESH_TAG",
    "encode_key_refresh",
    "decode_key_refresh",
]


def _check(a: int, b: int) -> int:
    if a != b:
        raise ModulusMismatchError(f"moduli differ: {a} vs {b}")
    return a


@dataclass(frozen=True)
class SharePair:
    s1: int
    s2: int
    q: int

    def __iter__(self):
        yield self.s1
        yield self.s2

    def __add__(self, other):
        if isinstance(other, SharePair):
            return share_add(self, other)
        return share_add_const(self, other)

    def __sub__(self, other):
        if isinstance(other, SharePair):
            return share_sub(self, other)
        return share_sub_const(self, other)

    def __rmul__(self, c):
        return share_mul_const(self, c)


def share(m: int, q: int, rng: DeterministicRng | None = None, r: int | None = None) -> SharePair:
    """``(r, m - r mod q)`` with ``r`` uniform on Z_q unless forced."""
    if r is None:
        if rng is None:
            raise ValueError("share needs an rng or a forced r")
        r = rng.uniform_mod(q)
    r = mod_reduce(int(r), q)
    return SharePair(r, mod_reduce(int(m) - r, q), q)


def reconst(p: SharePair) -> int:
    return mod_reduce(p.s1 + p.s2, p.q)


def share_add_const(x: SharePair, c: int) -> SharePair:
    # the constant goes to P1's share only
    return SharePair(mod_reduce(x.s1 + int(c), x.q), x.s2, x.q)


def share_sub_const(x: SharePair, c: int) -> SharePair:
    return SharePair(mod_reduce(x.s1 - int(c), x.q), x.s2, x.q)


def share_mul_const(x: SharePair, c: int) -> SharePair:
    c = int(c)
    return SharePair(mod_reduce(c * x.s1, x.q), mod_reduce(c * x.s2, x.q), x.q)


def share_add(x: SharePair, y: SharePair) -> SharePair:
    q = _check(x.q, y.q)
    return SharePair(mod_reduce(x.s1 + y.s1, q), mod_reduce(x.s2 + y.s2, q), q)


def share_sub(x: SharePair, y: SharePair) -> SharePair:
    q = _check(x.q, y.q)
    return SharePair(mod_reduce(x.s1 - y.s1, q), mod_reduce(x.s2 - y.s2, q), q)


@dataclass(frozen=True)
class ShareMatrix:
    s1: np.ndarray
    s2: np.ndarray
    q: int

    def __post_init__(self):
        if self.s1.shape != self.s2.shape:
            raise ValueError("share halves have different shapes")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.s1.shape

    def side(self, i: int) -> np.ndarray:
        return self.s1 if i == 1 else self.s2

    def __getitem__(self, idx) -> SharePair:
        return SharePair(int(self.s1[idx]), int(self.s2[idx]), self.q)


def share_vector_local(values: np.ndarray, q: int, rng: DeterministicRng, r: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise sharing of an int object array; returns the two halves."""
    values = np.asarray(values, dtype=object)
    s1 = np.empty(values.shape, dtype=object)
    for idx in np.ndindex(values.shape):
        s1[idx] = rng.uniform_mod(q) if r is None else mod_reduce(int(r[idx]), q)
    s2 = mod_reduce(values - s1, q)
    return s1, s2


def share_matrix(M, q: int, rng: DeterministicRng | None = None, r=None) -> ShareMatrix:
    M = mod_reduce(np.asarray(M, dtype=object), q)
    if r is not None:
        r = np.broadcast_to(np.asarray(r, dtype=object), M.shape)
    elif rng is None:
        raise ValueError("share_matrix needs an rng or forced randomness")
    s1, s2 = share_vector_local(M, q, rng, r)
    return ShareMatrix(s1, s2, q)


def reconst_matrix(X: ShareMatrix) -> np.ndarray:
    return mod_reduce(X.s1 + X.s2, X.q)


def prf_share(m: int, key: PrfKey, counter: int, q: int) -> int:
    """P2's share when P1's share is ``PRF_K(counter)``."""
    return mod_reduce(int(m) - key.consume(counter, q), q)


KEY_REFRESH_TAG = 0x06
_REFRESH = struct.Struct(">B16sQ")


def encode_key_refresh(key: bytes, epoch: int) -> bytes:
    """1-byte tag, 16-byte key, 8-byte epoch counter."""
    return _REFRESH.pack(KEY_REFRESH_TAG, key, epoch)


def decode_key_refresh(data: bytes) -> tuple[bytes, int]:
    tag, key, epoch = _REFRESH.unpack(data)
    if tag != KEY_REFRESH_TAG:
        raise ValueError(f"not a key-refresh message (tag {tag:#x})")
    return key, epoch
