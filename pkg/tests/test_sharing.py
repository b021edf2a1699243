import numpy as np
import pytest
from hypothesis import given, strategies as st

from s2pc.encoding import FixedPointSpec, encode_matrix
from s2pc.plants import PID_CONTROLLER
from s2pc.prg import DeterministicRng, PrfKey
from s2pc.ring import mod_reduce
from s2pc.sharing import (SharePair, decode_key_refresh, encode_key_refresh, prf_share, reconst, reconst_matrix,
                          share, share_add, share_add_const, share_matrix, share_mul_const, share_sub)

Q = 17


@pytest.mark.parametrize("m,r,want", [(5, 3, (3, 2)), (0, 0, (0, 0)), (-8, 8, (8, 1))])
def test_share_examples(m, r, want):
    s = share(m, Q, r=r)
    assert (s.s1, s.s2) == want


@pytest.mark.parametrize("pair,want", [((3, 2), 5), ((0, 0), 0), ((8, 8), -1)])
def test_reconst_examples(pair, want):
    assert reconst(SharePair(*pair, Q)) == want


def test_add_const_examples():
    x = SharePair(3, 2, Q)
    y = share_add_const(x, 1)
    assert (y.s1, y.s2) == (4, 2) and reconst(y) == 6
    assert share_add_const(x, 0) == x
    assert reconst(share_add_const(x, -5)) == 0


def test_mul_const_examples():
    x = share(5, Q, r=4)
    assert share_mul_const(x, 1) == x
    assert reconst(share_mul_const(x, 2)) == -7
    assert reconst(share_mul_const(x, 0)) == 0


def test_add_examples():
    rng = DeterministicRng(0)
    assert reconst(share_add(share(5, Q, rng), share(-5, Q, rng))) == 0
    assert reconst(share_add(share(8, Q, rng), share(8, Q, rng))) == -1
    x = share(6, Q, rng)
    assert reconst(share_add(x, share(0, Q, rng))) == 6


@pytest.mark.parametrize("q", [7, 13, 31])
def test_share_algebra_exhaustive(q):
    rng = DeterministicRng(q)
    R = range(-(q // 2), q - q // 2)
    for x in R:
        sx = share(x, q, rng)
        assert reconst(sx) == x
        for c in R:
            assert reconst(share_add_const(sx, c)) == mod_reduce(x + c, q)
            assert reconst(share_mul_const(sx, c)) == mod_reduce(x * c, q)
        for y in R:
            sy = share(y, q, rng)
            assert reconst(share_add(sx, sy)) == mod_reduce(x + y, q)
            assert reconst(share_sub(sx, sy)) == mod_reduce(x - y, q)


def test_first_share_uniform_independent_of_secret():
    # each share alone is uniform: histogram of s2 for two secrets matches
    q = 13
    rng = DeterministicRng(3)
    h0 = np.bincount([share(0, q, rng).s2 + 6 for _ in range(20000)], minlength=q)
    h1 = np.bincount([share(5, q, rng).s2 + 6 for _ in range(20000)], minlength=q)
    from scipy.stats import chi2_contingency
    assert chi2_contingency(np.vstack([h0, h1])).pvalue > 0.01


def test_matrix_examples():
    q = 2**61 - 1
    Z = np.zeros((2, 3), dtype=object)
    assert (reconst_matrix(share_matrix(Z, q, DeterministicRng(0))) == 0).all()
    C = encode_matrix([[0.5, -0.25]], FixedPointSpec(40, 32))
    assert (reconst_matrix(share_matrix(C, q, DeterministicRng(1))) == C).all()
    M = np.array([[1, -2], [3, 4]], dtype=object)
    S = share_matrix(M, q, r=np.zeros((2, 2), dtype=object))
    assert (S.s2 == M).all()


def test_pid_matrix_roundtrip():
    q = 2**127 - 1
    C = np.array([[int(v * 2**32) for v in PID_CONTROLLER["C"][0]]], dtype=object)
    assert (reconst_matrix(share_matrix(C, q, DeterministicRng(2))) == C).all()


def test_prf_share():
    q = 101
    key = PrfKey(bytes(16))
    s2 = prf_share(0, key, 0, q)
    assert s2 == mod_reduce(-PrfKey(bytes(16)).eval(0, q), q)
    s2 = prf_share(7, key, 1, q)
    assert mod_reduce(PrfKey(bytes(16)).eval(1, q) + s2, q) == 7


def test_key_refresh_frame():
    msg = encode_key_refresh(b"k" * 16, 3)
    assert len(msg) == 25
    assert decode_key_refresh(msg) == (b"k" * 16, 3)


@given(st.integers(-(2**60), 2**60), st.integers(-(2**60), 2**60), st.integers(-(2**60), 2**60))
def test_linearity(x, y, c):
    q = 2**61 - 1
    rng = DeterministicRng(x ^ y)
    sx, sy = share(x, q, rng), share(y, q, rng)
    assert reconst(share_add(share_mul_const(sx, c), sy)) == mod_reduce(c * x + y, q)
