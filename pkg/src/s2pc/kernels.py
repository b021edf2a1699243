"""Batched int64 kernels for small moduli (q < 2**31).

The statistical sweeps run 10**5 Beaver openings / truncations; these do
the same arithmetic as :mod:`s2pc.mpc` on whole arrays. With numba
installed the loops are jitted; set ``S2PC_DISABLE_NUMBA=1`` to force the
pure-numpy versions. Big moduli (the 256-bit protocol path) never come
here since numba has no arbitrary-precision ints.
"""
from __future__ import annotations

import os

import numpy as np

from .prg import DeterministicRng

MAX_Q = 1 << 31

_disabled = os.environ.get("S2PC_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
try:
    if _disabled:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def _check_q(q):
    if not 3 <= q < MAX_Q:
        raise ValueError(f"batch kernels need 3 <= q < 2**31, got {q}")


# --- pure numpy -------------------------------------------------------------

def _np_center(v, q):
    v = np.mod(v, q)
    return np.where(2 * v >= q, v - q, v)


def _np_beaver(x1, x2, y1, y2, a1, a2, b1, b2, c1, c2, q):
    d = _np_center((x1 - a1) + (x2 - a2), q)
    e = _np_center((y1 - b1) + (y2 - b2), q)
    de = _np_center(d * e, q)
    z1 = _np_center(_np_center(e * a1, q) + _np_center(d * b1, q) + c1 + de, q)
    z2 = _np_center(_np_center(e * a2, q) + _np_center(d * b2, q) + c2, q)
    return z1, z2, d, e


def _np_trunc(m1, m2, r1, r2, rp1, rp2, ell, q, inv):
    half = 1 << (ell - 1)
    p = 1 << ell
    mr = _np_center(m1 + m2 + _np_center(p * (r1 + r2), q) + rp1 + rp2 + half, q)
    pub = _np_center(mr - half, p)
    o1 = _np_center(_np_center(m1 + rp1 - pub, q) * inv, q)
    o2 = _np_center(_np_center(m2 + rp2, q) * inv, q)
    return o1, o2, mr


# --- numba ------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _c(v, q):
        v = v % q
        if 2 * v >= q:
            v -= q
        return v

    @njit(cache=True)
    def _nb_beaver(x1, x2, y1, y2, a1, a2, b1, b2, c1, c2, q):
        n = x1.shape[0]
        z1 = np.empty(n, np.int64)
        z2 = np.empty(n, np.int64)
        d = np.empty(n, np.int64)
        e = np.empty(n, np.int64)
        for i in range(n):
            di = _c((x1[i] - a1[i]) + (x2[i] - a2[i]), q)
            ei = _c((y1[i] - b1[i]) + (y2[i] - b2[i]), q)
            z1[i] = _c(_c(ei * a1[i], q) + _c(di * b1[i], q) + c1[i] + _c(di * ei, q), q)
            z2[i] = _c(_c(ei * a2[i], q) + _c(di * b2[i], q) + c2[i], q)
            d[i] = di
            e[i] = ei
        return z1, z2, d, e

    @njit(cache=True)
    def _nb_trunc(m1, m2, r1, r2, rp1, rp2, ell, q, inv):
        n = m1.shape[0]
        o1 = np.empty(n, np.int64)
        o2 = np.empty(n, np.int64)
        mr = np.empty(n, np.int64)
        half = np.int64(1) << (ell - 1)
        p = np.int64(1) << ell
        for i in range(n):
            v = _c(m1[i] + m2[i] + _c(p * (r1[i] + r2[i]), q) + rp1[i] + rp2[i] + half, q)
            pub = _c(v - half, p)
            o1[i] = _c(_c(m1[i] + rp1[i] - pub, q) * inv, q)
            o2[i] = _c(_c(m2[i] + rp2[i], q) * inv, q)
            mr[i] = v
        return o1, o2, mr

    _beaver_impl, _trunc_impl = _nb_beaver, _nb_trunc
else:
    _beaver_impl, _trunc_impl = _np_beaver, _np_trunc


def _i64(*arrs):
    return [np.ascontiguousarray(a, dtype=np.int64) for a in arrs]


def center(v, q: int) -> np.ndarray:
    _check_q(q)
    return _np_center(np.asarray(v, dtype=np.int64), q)


def beaver_batch(x1, x2, y1, y2, a1, a2, b1, b2, c1, c2, q: int, backend: str | None = None):
    """Element-wise Beaver products. Returns ``(z1, z2, d, e)``.

    The openings are summed directly here, which is the value each party
    ends up with after the exchange.
    """
    _check_q(q)
    impl = _pick(backend, _beaver_impl, _np_beaver)
    return impl(*_i64(x1, x2, y1, y2, a1, a2, b1, b2, c1, c2), np.int64(q))


def trunc_batch(m1, m2, r1, r2, rp1, rp2, ell: int, q: int, backend: str | None = None):
    """Element-wise truncation with P1 applying the correction. Returns ``(o1, o2, m_r)``."""
    _check_q(q)
    if (1 << ell) >= q:
        raise ValueError("2**ell must be below q")
    inv = pow(1 << ell, -1, q)
    impl = _pick(backend, _trunc_impl, _np_trunc)
    return impl(*_i64(m1, m2, r1, r2, rp1, rp2), np.int64(ell), np.int64(q), np.int64(inv))


def _pick(backend, fast, slow):
    if backend is None:
        return fast
    if backend == "numpy":
        return slow
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but unavailable")
        return fast
    raise ValueError(f"unknown backend {backend!r}")


def uniform_mod_batch(rng: DeterministicRng, q: int, size: int) -> np.ndarray:
    """``size`` uniform centered residues mod ``q`` by vectorized rejection."""
    _check_q(q)
    bits = int(q).bit_length()
    out = np.empty(0, dtype=np.int64)
    while out.size < size:
        want = int((size - out.size) * 1.1) + 16
        raw = np.frombuffer(rng.token_bytes(4 * want), dtype=">u4").astype(np.int64)
        raw &= (1 << bits) - 1
        out = np.concatenate([out, raw[raw < q]])
    return _np_center(out[:size], q)


def signed_bits_batch(rng: DeterministicRng, bits: int, size: int) -> np.ndarray:
    """Uniform draws from ``[-2**(bits-1), 2**(bits-1))``, ``bits <= 62``."""
    if not 1 <= bits <= 62:
        raise ValueError("bits must be in 1..62")
    raw = np.frombuffer(rng.token_bytes(8 * size), dtype=">u8").astype(np.uint64)
    raw >>= np.uint64(64 - bits)
    return raw.astype(np.int64) - (1 << (bits - 1))
