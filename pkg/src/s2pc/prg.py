"""Seeded randomness and the keyed pseudorandom function.

Both are AES-128 based: the generator is an AES-CTR keystream keyed from a
seed, the PRF is AES-128 on a counter block. Elements of ``Z_q`` are drawn
by rejection sampling on ``ceil(l_q / 8)``-byte blocks masked to ``l_q``
bits.
"""
from __future__ import annotations

import hashlib
import struct

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .ring import element_bytes, mod_reduce

_CHUNK = 1 << 14


def _aes_ecb(key: bytes):
    return Cipher(algorithms.AES(key), modes.ECB()).encryptor()


class DeterministicRng:
    """Replayable cryptographically strong generator (AES-128-CTR)."""

    def __init__(self, seed: int | bytes | str, label: str = ""):
        if isinstance(seed, int):
            seed = seed.to_bytes(max(1, (seed.bit_length() + 8) // 8), "big", signed=True)
        elif isinstance(seed, str):
            seed = seed.encode()
        digest = hashlib.sha256(b"s2pc.rng|" + label.encode() + b"|" + seed).digest()
        self._key = digest[:16]
        self._ctr = Cipher(algorithms.AES(self._key), modes.CTR(digest[16:])).encryptor()
        self._buf = b""
        self._pos = 0

    def spawn(self, label: str) -> "DeterministicRng":
        """Independent child stream, a function of this stream's key and ``label``."""
        return DeterministicRng(self._key, label)

    def token_bytes(self, n: int) -> bytes:
        if self._pos + n > len(self._buf):
            rest = self._buf[self._pos:]
            self._buf = rest + self._ctr.update(bytes(max(_CHUNK, n)))
            self._pos = 0
        out = self._buf[self._pos:self._pos + n]
        self._pos += n
        return out

    def randbits(self, k: int) -> int:
        if k <= 0:
            return 0
        v = int.from_bytes(self.token_bytes((k + 7) // 8), "big")
        return v >> (-k % 8)

    def randbelow(self, n: int) -> int:
        k = n.bit_length()
        while True:
            v = self.randbits(k)
            if v < n:
                return v

    def uniform_mod(self, q: int) -> int:
        """Uniform element of the centered residue system ``Z_q``."""
        return mod_reduce(self.randbelow(q), q)

    def signed_bits(self, bits: int) -> int:
        """Uniform element of ``Z(bits) = [-2**(bits-1), 2**(bits-1))``."""
        return self.randbits(bits) - (1 << (bits - 1))


class CounterReuseError(RuntimeError):
    pass


class KeyRefreshRequired(RuntimeError):
    pass


class PrfKey:
    """One epoch of a PRF key with a consumed-counter watermark.

    Counters must be strictly increasing within an epoch; the same
    ``(key, counter)`` pair is never handed out twice.
    """

    def __init__(self, key: bytes, epoch: int = 0, in_bits: int = 64, refresh_period: int = 1 << 16):
        if len(key) != 16:
            raise ValueError("PRF keys are 128-bit")
        if refresh_period < 1:
            raise ValueError("refresh period must be >= 1")
        self.key = bytes(key)
        self.epoch = epoch
        self.in_bits = in_bits
        self.refresh_period = refresh_period
        self._enc = _aes_ecb(self.key)
        self._watermark = -1

    @property
    def watermark(self) -> int:
        return self._watermark

    def copy(self) -> "PrfKey":
        """Fresh holder of the same key (what the receiving party builds)."""
        return PrfKey(self.key, self.epoch, self.in_bits, self.refresh_period)

    def block(self, counter: int, retry: int, index: int) -> bytes:
        return self._enc.update(struct.pack(">QII", counter, retry, index))

    def eval(self, counter: int, q: int) -> int:
        """Pure evaluation; does not touch the watermark."""
        if not 0 <= counter < (1 << self.in_bits):
            raise KeyRefreshRequired(f"counter {counter} outside the {self.in_bits}-bit input domain")
        nbytes = element_bytes(q)
        nbits = int(q).bit_length()
        nblocks = (nbytes + 15) // 16
        retry = 0
        while True:
            raw = b"".join(self.block(counter, retry, j) for j in range(nblocks))[:nbytes]
            v = int.from_bytes(raw, "big") & ((1 << nbits) - 1)
            if v < q:
                return mod_reduce(v, q)
            retry += 1

    def consume(self, counter: int, q: int) -> int:
        if counter <= self._watermark:
            raise CounterReuseError(f"counter {counter} already consumed in epoch {self.epoch}")
        out = self.eval(counter, q)
        self._watermark = counter
        return out


def prf_eval(key: PrfKey, counter: int, q: int) -> int:
    return key.consume(counter, q)
