import os
import subprocess
import sys

import numpy as np
import pytest

from s2pc import kernels
from s2pc.mpc import mult_close, mult_open, trunc_close, trunc_open, trunc_public
from s2pc.prg import DeterministicRng
from s2pc.ring import gen_prime, mod_reduce

Q = gen_prime(30, 0).q
N = 2000


def _shares(rng, vals, q):
    s1 = kernels.uniform_mod_batch(rng, q, len(vals))
    return s1, kernels.center(vals - s1, q)


def _beaver_inputs(seed, q=Q):
    rng = DeterministicRng(seed)
    x, y, a, b = (kernels.uniform_mod_batch(rng, q, N) for _ in range(4))
    c = kernels.center(np.array([mod_reduce(int(u) * int(v), q) for u, v in zip(a, b)], dtype=np.int64), q)
    out = []
    for v in (x, y, a, b, c):
        out += _shares(rng, v, q)
    return (x, y), out


def test_backend_flag_default():
    assert kernels.BACKEND == ("numba" if kernels.HAVE_NUMBA else "numpy")


def test_env_flag_disables_numba():
    env = dict(os.environ, S2PC_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from s2pc import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_beaver_batch_matches_scalar_path():
    (x, y), args = _beaver_inputs(0)
    z1, z2, d, e = kernels.beaver_batch(*args, Q, backend="numpy")
    assert (kernels.center(z1 + z2, Q) == kernels.center(np.array([mod_reduce(int(u) * int(v), Q) for u, v in zip(x, y)]), Q)).all()
    x1, x2, y1, y2, a1, a2, b1, b2, c1, c2 = (list(map(int, v)) for v in args)
    for j in range(0, N, 97):
        d1, e1 = mult_open(x1[j], y1[j], a1[j], b1[j], Q)
        d2, e2 = mult_open(x2[j], y2[j], a2[j], b2[j], Q)
        dd, ee = mod_reduce(d1 + d2, Q), mod_reduce(e1 + e2, Q)
        assert (dd, ee) == (d[j], e[j])
        assert mult_close(1, dd, ee, a1[j], b1[j], c1[j], Q) == z1[j]
        assert mult_close(2, dd, ee, a2[j], b2[j], c2[j], Q) == z2[j]


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")
def test_numba_matches_numpy():
    _, args = _beaver_inputs(1)
    for a, b in zip(kernels.beaver_batch(*args, Q, backend="numba"), kernels.beaver_batch(*args, Q, backend="numpy")):
        assert (a == b).all()
    rng = DeterministicRng(2)
    m = kernels.signed_bits_batch(rng, 20, N)
    r = kernels.signed_bits_batch(rng, 24, N)
    rp = kernels.signed_bits_batch(rng, 4, N)
    targs = [*_shares(rng, m, Q), *_shares(rng, r, Q), *_shares(rng, rp, Q)]
    for a, b in zip(kernels.trunc_batch(*targs, 4, Q, backend="numba"), kernels.trunc_batch(*targs, 4, Q, backend="numpy")):
        assert (a == b).all()


def test_trunc_batch_matches_scalar_path():
    rng = DeterministicRng(3)
    ell = 4
    m = kernels.signed_bits_batch(rng, 20, N)
    r = kernels.signed_bits_batch(rng, 24, N)
    rp = kernels.signed_bits_batch(rng, ell, N)
    m1, m2 = _shares(rng, m, Q)
    r1, r2 = _shares(rng, r, Q)
    p1, p2 = _shares(rng, rp, Q)
    o1, o2, mr = kernels.trunc_batch(m1, m2, r1, r2, p1, p2, ell, Q)
    for j in range(0, N, 53):
        a = trunc_open(1, int(m1[j]), int(r1[j]), int(p1[j]), ell, Q)
        b = trunc_open(2, int(m2[j]), int(r2[j]), int(p2[j]), ell, Q)
        assert mod_reduce(a + b, Q) == mr[j]
        pub = trunc_public(int(mr[j]), ell)
        assert trunc_close(1, int(m1[j]), int(p1[j]), pub, ell, Q) == o1[j]
        assert trunc_close(2, int(m2[j]), int(p2[j]), None, ell, Q) == o2[j]
    err = kernels.center(o1 + o2, Q) - (2 * m + 16) // 32
    assert np.abs(err).max() <= 1


def test_bad_modulus():
    with pytest.raises(ValueError):
        kernels.center(np.zeros(3, dtype=np.int64), 2**40)
    with pytest.raises(ValueError):
        kernels.beaver_batch(*([np.zeros(2)] * 10), 2**31 + 11)


def test_uniform_batch_range():
    v = kernels.uniform_mod_batch(DeterministicRng(0), 101, 50_000)
    assert v.min() == -50 and v.max() == 50
