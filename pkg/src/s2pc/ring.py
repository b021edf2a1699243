"""Integers modulo a prime with centered representatives.

Every residue lives in ``[-q/2, q/2)``; the non-negative form ``[0, q)``
appears only on the wire.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Modulus",
    "RingElement",
    "NotInvertibleError",
    "ModulusMismatchError",
    "mod_reduce",
    "mod_inv",
    "is_probable_prime",
    "gen_prime",
    "element_bytes",
    "serialize",
    "deserialize",
]

MR_ROUNDS = 64
MAX_CANDIDATES = 1 << 20

_SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97)


class NotInvertibleError(ArithmeticError):
    pass


class ModulusMismatchError(ValueError):
    pass


def mod_reduce(m, q: int):
    """``m - floor((m + q/2) / q) * q``.

    Works for python ints and for numpy object arrays of ints. ``q`` may be
    even (the truncation protocol reduces modulo ``2**ell``).
    """
    q = int(q)
    return m - ((2 * m + q) // (2 * q)) * q


def mod_inv(m: int, q: int) -> int:
    """Centered inverse of ``m`` modulo ``q``."""
    try:
        v = pow(int(m), -1, int(q))
    except ValueError:
        raise NotInvertibleError(f"{m} has no inverse modulo {q}") from None
    return mod_reduce(v, q)


def is_probable_prime(n: int, rounds: int = MR_ROUNDS, seed: int = 0) -> bool:
    """Miller-Rabin with bases drawn from a seeded generator."""
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    bases = random.Random(f"mr:{seed}:{n.bit_length()}")
    for _ in range(rounds):
        a = bases.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class Modulus:
    q: int

    def __post_init__(self):
        q = int(self.q)
        object.__setattr__(self, "q", q)
        if q < 3 or q % 2 == 0 or not is_probable_prime(q):
            raise ValueError(f"modulus must be an odd prime >= 3, got {q}")

    @property
    def bit_length(self) -> int:
        """``floor(log2 q) + 1``."""
        return self.q.bit_length()

    @property
    def log2_floor(self) -> int:
        return self.q.bit_length() - 1

    @property
    def nbytes(self) -> int:
        return element_bytes(self.q)

    def reduce(self, m):
        return mod_reduce(m, self.q)

    def inv(self, m: int) -> int:
        return mod_inv(m, self.q)

    def element(self, value: int) -> "RingElement":
        return RingElement(value, self)

    def __int__(self) -> int:
        return self.q


@dataclass(frozen=True)
class RingElement:
    value: int
    modulus: Modulus

    def __post_init__(self):
        object.__setattr__(self, "value", mod_reduce(int(self.value), self.modulus.q))

    def _coerce(self, other) -> int:
        if isinstance(other, RingElement):
            if other.modulus != self.modulus:
                raise ModulusMismatchError("operands live in different rings")
            return other.value
        if isinstance(other, (int, np.integer)):
            return int(other)
        return NotImplemented

    def __add__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return RingElement(self.value + v, self.modulus)

    __radd__ = __add__

    def __sub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return RingElement(self.value - v, self.modulus)

    def __rsub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return RingElement(v - self.value, self.modulus)

    def __mul__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return RingElement(self.value * v, self.modulus)

    __rmul__ = __mul__

    def __neg__(self):
        return RingElement(-self.value, self.modulus)

    def inverse(self) -> "RingElement":
        return RingElement(mod_inv(self.value, self.modulus.q), self.modulus)

    def __int__(self) -> int:
        return self.value

    def to_bytes(self) -> bytes:
        return serialize(self.value, self.modulus.q)

    @classmethod
    def from_bytes(cls, data: bytes, modulus: Modulus) -> "RingElement":
        return cls(deserialize(data, modulus.q), modulus)


def ring_add(a: RingElement, b: RingElement) -> RingElement:
    return a + b


def ring_sub(a: RingElement, b: RingElement) -> RingElement:
    return a - b


def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    return a * b


def element_bytes(q: int) -> int:
    return (int(q).bit_length() + 7) // 8


def serialize(value: int, q: int) -> bytes:
    """Big-endian encoding of the ``[0, q)`` representative."""
    return (int(value) % q).to_bytes(element_bytes(q), "big")


def deserialize(data: bytes, q: int) -> int:
    v = int.from_bytes(data, "big")
    if v >= q:
        raise ValueError("encoded residue out of range")
    return mod_reduce(v, q)


def _seed_offset(bits: int, seed: int) -> int:
    if seed == 0 or bits < 4:
        return 0
    h = int.from_bytes(hashlib.sha256(f"gen_prime:{seed}".encode()).digest(), "big")
    return 2 * (h % (1 << (bits - 3)))


def gen_prime(bits: int, seed: int = 0) -> Modulus:
    """Deterministic prime with exactly ``bits`` bits.

    Scans odd candidates upward from ``2**(bits-1)`` plus an even offset
    derived from ``seed`` (zero for seed 0).
    """
    if bits < 2:
        raise ValueError("bits must be >= 2")
    start = (1 << (bits - 1)) + _seed_offset(bits, seed)
    cand = start | 1
    top = 1 << bits
    for _ in range(MAX_CANDIDATES):
        if cand >= top:
            break
        if is_probable_prime(cand, seed=seed):
            return Modulus(cand)
        cand += 2
    raise RuntimeError(f"no {bits}-bit prime found from seed {seed}")
