"""Fixed-point encoding between reals and the integer sets Z(k)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "AssumptionViolation",
    "RangeError",
    "FixedPointSpec",
    "EncodedController",
    "as_fraction",
    "round_half_up",
    "in_zk",
    "encode_scalar",
    "decode_scalar",
    "encode_matrix",
    "encode_controller",
    "snap_to_grid",
    "to_fraction_array",
    "int_array",
]


class AssumptionViolation(ValueError):
    """A controller parameter is not a k-bit fixed-point number."""


class RangeError(ValueError):
    pass


@dataclass(frozen=True)
class FixedPointSpec:
    k: int
    ell: int

    def __post_init__(self):
        if not (self.k > self.ell > 0):
            raise ValueError(f"need k > ell > 0, got k={self.k}, ell={self.ell}")

    @classmethod
    def from_integer_bits(cls, ell: int, int_bits: int) -> "FixedPointSpec":
        return cls(ell + int_bits, ell)

    @property
    def int_bits(self) -> int:
        return self.k - self.ell


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, np.floating):
        return Fraction(*x.as_integer_ratio())
    if isinstance(x, np.integer):
        return Fraction(int(x))
    return Fraction(x)


def in_zk(v: int, k: int) -> bool:
    return -(1 << (k - 1)) <= v < (1 << (k - 1))


def round_half_up(x) -> int:
    """``floor(x + 1/2)``; exact for ints, Fractions and numpy floats."""
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return math.floor(x + Fraction(1, 2))
    if isinstance(x, np.floating):
        return int(np.floor(x + x.dtype.type(0.5)))
    return math.floor(as_fraction(x) + Fraction(1, 2))


def encode_scalar(x, ell: int, k: int | None = None) -> int:
    """``round(2**ell * x)``, optionally checked against Z(k)."""
    if isinstance(x, np.floating) and x.dtype == np.longdouble:
        v = int(np.floor(np.ldexp(x, ell) + np.longdouble(0.5)))
    else:
        v = round_half_up(as_fraction(x) * (1 << ell))
    if k is not None and not in_zk(v, k):
        raise RangeError(f"{x} encodes to {v}, outside Z({k})")
    return v


def decode_scalar(v: int, scale_exp: int, exact: bool = False):
    """``2**-scale_exp * v`` as a Fraction or a 64-bit-significand float."""
    v = int(v)
    if exact:
        return Fraction(v, 1 << scale_exp) if scale_exp >= 0 else Fraction(v << -scale_exp)
    if v == 0:
        return np.longdouble(0)
    shift = max(0, abs(v).bit_length() - 63)
    # truncation of the low bits costs at most 2**-63 relative
    hi = v >> shift if v > 0 else -((-v) >> shift)
    return np.ldexp(np.longdouble(hi), shift - scale_exp)


def to_fraction_array(a) -> np.ndarray:
    arr = np.asarray(a)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = as_fraction(v)
    return out


def int_array(a) -> np.ndarray:
    arr = np.asarray(a)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = int(v)
    return out


def encode_matrix(m, spec: FixedPointSpec, name: str = "matrix") -> np.ndarray:
    """Exact entrywise encoding; raises on the first entry outside Q(k, ell)."""
    arr = np.atleast_1d(np.asarray(m, dtype=object))
    out = np.empty(arr.shape, dtype=object)
    scale = 1 << spec.ell
    for idx, x in np.ndenumerate(arr):
        v = as_fraction(x) * scale
        if v.denominator != 1:
            raise AssumptionViolation(f"{name}{list(idx)} = {x} is not a multiple of 2^-{spec.ell}")
        if not in_zk(v.numerator, spec.k):
            raise AssumptionViolation(f"{name}{list(idx)} = {x} lies outside Q({spec.k},{spec.ell})")
        out[idx] = v.numerator
    return out


def snap_to_grid(m, spec: FixedPointSpec) -> tuple[np.ndarray, float]:
    """Nearest points of Q(k, ell) (ties up) and the largest snap distance.

    Returns an object array of Fractions.
    """
    arr = np.atleast_1d(np.asarray(m, dtype=object))
    out = np.empty(arr.shape, dtype=object)
    dist = Fraction(0)
    lo, hi = -(1 << (spec.k - 1)), (1 << (spec.k - 1)) - 1
    for idx, x in np.ndenumerate(arr):
        fx = as_fraction(x)
        z = min(max(round_half_up(fx * (1 << spec.ell)), lo), hi)
        out[idx] = Fraction(z, 1 << spec.ell)
        dist = max(dist, abs(out[idx] - fx))
    return out, float(dist)


@dataclass(frozen=True)
class EncodedController:
    """Integer parameters ``2**ell * (A, B, C, D, x0)``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    x0: np.ndarray
    spec: FixedPointSpec

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    def stacked(self) -> np.ndarray:
        """``[[A, B], [C, D]]``, the (n+m) x (n+p) operand of one step."""
        return np.block([[self.A, self.B], [self.C, self.D]]).astype(object)


def encode_controller(A, B, C, D, x0, spec: FixedPointSpec) -> EncodedController:
    A = np.atleast_2d(np.asarray(A, dtype=object))
    B = np.atleast_2d(np.asarray(B, dtype=object))
    C = np.atleast_2d(np.asarray(C, dtype=object))
    D = np.atleast_2d(np.asarray(D, dtype=object))
    x0 = np.asarray(x0, dtype=object).reshape(-1)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n or D.shape != (C.shape[0], B.shape[1]) or x0.shape != (n,):
        raise ValueError("controller dimensions are inconsistent")
    return EncodedController(
        encode_matrix(A, spec, "A"),
        encode_matrix(B, spec, "B"),
        encode_matrix(C, spec, "C"),
        encode_matrix(D, spec, "D"),
        encode_matrix(x0, spec, "x0"),
        spec,
    )
