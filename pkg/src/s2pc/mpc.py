"""Beaver multiplication, statistical truncation and their auxiliary inputs.

The party-local halves (``mult_open``/``mult_close``, ``trunc_open``/
``trunc_close``) are what the protocol roles call; ``beaver_mult``,
``trunc`` and ``matmul_shares`` drive both halves over a :class:`Channel`
for tests and standalone use.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prg import DeterministicRng
from .ring import mod_inv, mod_reduce
from .sharing import SharePair, ShareMatrix, share
from .wire import Channel, Tag, decode_elements, decode_signed, encode_elements, encode_signed, frame

__all__ = [
    "AuxReuseError",
    "AuxShortfallError",
    "BeaverTriple",
    "TruncMask",
    "TripleHalf",
    "MaskHalf",
    "trunc_kappa",
    "gen_triple",
    "gen_trunc_mask",
    "gen_triples_split",
    "gen_masks_split",
    "mult_open",
    "mult_close",
    "trunc_open",
    "trunc_public",
    "trunc_close",
    "beaver_mult",
    "trunc",
    "matmul_shares",
]


class AuxReuseError(RuntimeError):
    """A Beaver triple or truncation mask was presented a second time."""


class AuxShortfallError(RuntimeError):
    pass


@dataclass
class BeaverTriple:
    a: SharePair
    b: SharePair
    c: SharePair
    consumed: bool = field(default=False, compare=False)

    def take(self) -> "BeaverTriple":
        if self.consumed:
            raise AuxReuseError("Beaver triple already consumed")
        self.consumed = True
        return self


@dataclass
class TruncMask:
    r: SharePair
    rp: SharePair
    consumed: bool = field(default=False, compare=False)

    def take(self) -> "TruncMask":
        if self.consumed:
            raise AuxReuseError("truncation mask already consumed")
        self.consumed = True
        return self


@dataclass
class TripleHalf:
    """One party's shares of a batch of triples (object arrays)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __len__(self) -> int:
        return len(self.a)

    def slice(self, start: int, stop: int) -> "TripleHalf":
        return TripleHalf(self.a[start:stop], self.b[start:stop], self.c[start:stop])


@dataclass
class MaskHalf:
    r: np.ndarray
    rp: np.ndarray

    def __len__(self) -> int:
        return len(self.r)


def trunc_kappa(q: int, lam: int) -> int:
    """Largest message bit length the truncation protocol accepts."""
    return int(q).bit_length() - 1 - lam - 1


def gen_triple(q: int, rng: DeterministicRng | None = None, a: int | None = None, b: int | None = None) -> BeaverTriple:
    if a is None:
        a = rng.uniform_mod(q)
    if b is None:
        b = rng.uniform_mod(q)
    c = mod_reduce(a * b, q)
    if rng is None:
        return BeaverTriple(share(a, q, r=0), share(b, q, r=0), share(c, q, r=0))
    return BeaverTriple(share(a, q, rng), share(b, q, rng), share(c, q, rng))


def gen_trunc_mask(kappa: int, ell: int, lam: int, q: int, rng: DeterministicRng | None = None,
                   r: int | None = None, rp: int | None = None) -> TruncMask:
    if not kappa > ell:
        raise ValueError(f"truncation needs kappa > ell (kappa={kappa}, ell={ell})")
    if kappa != trunc_kappa(q, lam):
        raise ValueError(f"kappa must be floor(log2 q) - lambda - 1 = {trunc_kappa(q, lam)}")
    if r is None:
        r = rng.signed_bits(kappa - ell + lam)
    if rp is None:
        rp = rng.signed_bits(ell)
    if rng is None:
        return TruncMask(share(r, q, r=0), share(rp, q, r=0))
    return TruncMask(share(r, q, rng), share(rp, q, rng))


def gen_triples_split(count: int, q: int, rng: DeterministicRng, first_half=None) -> tuple[TripleHalf, TripleHalf]:
    """``count`` fresh triples split into the two parties' halves.

    ``first_half(j)`` may supply P1's share of the j-th shared scalar (the
    PRF mode); otherwise P1's shares come from ``rng``.
    """
    h1 = [np.empty(count, dtype=object) for _ in range(3)]
    h2 = [np.empty(count, dtype=object) for _ in range(3)]
    j = 0
    for t in range(count):
        a = rng.uniform_mod(q)
        b = rng.uniform_mod(q)
        for slot, v in enumerate((a, b, mod_reduce(a * b, q))):
            s1 = first_half(j) if first_half is not None else rng.uniform_mod(q)
            h1[slot][t] = s1
            h2[slot][t] = mod_reduce(v - s1, q)
            j += 1
    return TripleHalf(*h1), TripleHalf(*h2)


def gen_masks_split(count: int, kappa: int, ell: int, lam: int, q: int, rng: DeterministicRng,
                    first_half=None) -> tuple[MaskHalf, MaskHalf]:
    if not kappa > ell:
        raise ValueError(f"truncation needs kappa > ell (kappa={kappa}, ell={ell})")
    h1 = [np.empty(count, dtype=object) for _ in range(2)]
    h2 = [np.empty(count, dtype=object) for _ in range(2)]
    j = 0
    for h in range(count):
        vals = (rng.signed_bits(kappa - ell + lam), rng.signed_bits(ell))
        for slot, v in enumerate(vals):
            s1 = first_half(j) if first_half is not None else rng.uniform_mod(q)
            h1[slot][h] = s1
            h2[slot][h] = mod_reduce(v - s1, q)
            j += 1
    return MaskHalf(*h1), MaskHalf(*h2)


def mult_open(x_i, y_i, a_i, b_i, q: int):
    """Local masking: this party's shares of ``d = x - a`` and ``e = y - b``."""
    return mod_reduce(x_i - a_i, q), mod_reduce(y_i - b_i, q)


def mult_close(i: int, d, e, a_i, b_i, c_i, q: int):
    z = e * a_i + d * b_i + c_i
    if i == 1:
        z = z + d * e
    return mod_reduce(z, q)


def trunc_open(i: int, m_i, r_i, rp_i, ell: int, q: int):
    m_r = m_i + (r_i << ell if isinstance(r_i, int) else r_i * (1 << ell)) + rp_i
    if i == 1:
        m_r = m_r + (1 << (ell - 1))
    return mod_reduce(m_r, q)


def trunc_public(m_r, ell: int):
    """``(m_r - 2**(ell-1)) mod 2**ell`` in the centered system."""
    return mod_reduce(m_r - (1 << (ell - 1)), 1 << ell)


def trunc_close(i: int, m_i, rp_i, public, ell: int, q: int, holder: int = 1):
    """``inv(2**ell) * (m_i + r'_i [- public])``; only ``holder`` subtracts."""
    v = m_i + rp_i
    if i == holder:
        v = v - public
    return mod_reduce(mod_inv(1 << ell, q) * v, q)


def _exchange(ch: Channel, tag: Tag, out1, out2, q: int, step: int = -1):
    ch.p1_to_p2.send(frame(tag, encode_elements(out1, q)), step)
    ch.p2_to_p1.send(frame(tag, encode_elements(out2, q)), step)
    (_, from1), = ch.p1_to_p2.recv_frames(tag)
    (_, from2), = ch.p2_to_p1.recv_frames(tag)
    return np.array(decode_elements(from1, q), dtype=object), np.array(decode_elements(from2, q), dtype=object)


def beaver_mult(x: SharePair, y: SharePair, t: BeaverTriple, ch: Channel | None = None,
                opened: list | None = None) -> SharePair:
    """Shares of ``x * y mod q``; opens ``d`` and ``e`` (four ring elements)."""
    q = x.q
    if not (x.q == y.q == t.a.q):
        raise ValueError("operands and triple use different moduli")
    t.take()
    ch = ch or Channel(q)
    d1, e1 = mult_open(x.s1, y.s1, t.a.s1, t.b.s1, q)
    d2, e2 = mult_open(x.s2, y.s2, t.a.s2, t.b.s2, q)
    got_by_2, got_by_1 = _exchange(ch, Tag.MULT_OPEN, [d1, e1], [d2, e2], q)
    # each party reconstructs from its own half and the peer's message
    d = mod_reduce(d1 + got_by_1[0], q)
    e = mod_reduce(e1 + got_by_1[1], q)
    assert d == mod_reduce(got_by_2[0] + d2, q) and e == mod_reduce(got_by_2[1] + e2, q)
    if opened is not None:
        opened.append((d, e))
    z1 = mult_close(1, d, e, t.a.s1, t.b.s1, t.c.s1, q)
    z2 = mult_close(2, d, e, t.a.s2, t.b.s2, t.c.s2, q)
    return SharePair(z1, z2, q)


def trunc(m: SharePair, ell: int, mask: TruncMask, ch: Channel | None = None, correction_holder: int = 1,
          revealed: list | None = None) -> SharePair:
    """Shares of ``round(m / 2**ell) + w`` with ``w`` in {-1, 0, 1}.

    P2 sends its share of ``m_r``; P1 reconstructs it. With
    ``correction_holder=2`` P1 forwards the ell-bit public correction to P2,
    who applies it instead of P1.
    """
    q = m.q
    if ell < 1:
        raise ValueError("ell must be positive")
    mask.take()
    ch = ch or Channel(q, ell)
    mr1 = trunc_open(1, m.s1, mask.r.s1, mask.rp.s1, ell, q)
    mr2 = trunc_open(2, m.s2, mask.r.s2, mask.rp.s2, ell, q)
    ch.p2_to_p1.send(frame(Tag.TRUNC_OPEN, encode_elements([mr2], q)))
    (_, payload), = ch.p2_to_p1.recv_frames(Tag.TRUNC_OPEN)
    m_r = mod_reduce(mr1 + decode_elements(payload, q)[0], q)
    if revealed is not None:
        revealed.append(m_r)
    pub = trunc_public(m_r, ell)
    pub2 = None
    if correction_holder == 2:
        ch.p1_to_p2.send(frame(Tag.TRUNC_PUBLIC, encode_signed([pub], ell)))
        (_, payload), = ch.p1_to_p2.recv_frames(Tag.TRUNC_PUBLIC)
        pub2 = decode_signed(payload, ell)[0]
    elif correction_holder != 1:
        raise ValueError("correction_holder must be 1 or 2")
    out1 = trunc_close(1, m.s1, mask.rp.s1, pub, ell, q, correction_holder)
    out2 = trunc_close(2, m.s2, mask.rp.s2, pub2, ell, q, correction_holder)
    return SharePair(out1, out2, q)


def matmul_shares(X: ShareMatrix, Y: ShareMatrix, triples: list[BeaverTriple], ch: Channel | None = None) -> ShareMatrix:
    """Entry (i, j) reconstructs to sum_k X_ik Y_kj; one triple per product.

    All ``d1*d2*d3`` openings travel in a single message per direction.
    """
    q = X.q
    (d1, d2), (d2b, d3) = X.shape, Y.shape
    if d2 != d2b:
        raise ValueError("inner dimensions differ")
    need = d1 * d2 * d3
    if len(triples) != need:
        raise AuxShortfallError(f"need exactly {need} triples, got {len(triples)}")
    for t in triples:
        t.take()
    ch = ch or Channel(q)

    def half(i):
        a = np.array([t.a.s1 if i == 1 else t.a.s2 for t in triples], dtype=object).reshape(d1, d2, d3)
        b = np.array([t.b.s1 if i == 1 else t.b.s2 for t in triples], dtype=object).reshape(d1, d2, d3)
        c = np.array([t.c.s1 if i == 1 else t.c.s2 for t in triples], dtype=object).reshape(d1, d2, d3)
        x = np.broadcast_to(X.side(i)[:, :, None], (d1, d2, d3))
        y = np.broadcast_to(Y.side(i)[None, :, :], (d1, d2, d3))
        return a, b, c, x, y

    h1, h2 = half(1), half(2)
    de1 = mult_open(h1[3], h1[4], h1[0], h1[1], q)
    de2 = mult_open(h2[3], h2[4], h2[0], h2[1], q)
    out1 = np.concatenate([de1[0].ravel(), de1[1].ravel()])
    out2 = np.concatenate([de2[0].ravel(), de2[1].ravel()])
    _, got_by_1 = _exchange(ch, Tag.MULT_OPEN, out1, out2, q)
    d = mod_reduce(out1[:need] + got_by_1[:need], q).reshape(d1, d2, d3)
    e = mod_reduce(out1[need:] + got_by_1[need:], q).reshape(d1, d2, d3)
    z1 = mod_reduce(mult_close(1, d, e, h1[0], h1[1], h1[2], q).sum(axis=1), q)
    z2 = mod_reduce(mult_close(2, d, e, h2[0], h2[1], h2[2], q).sum(axis=1), q)
    return ShareMatrix(z1, z2, q)
