import pytest
from hypothesis import given, strategies as st

from s2pc.ring import (Modulus, ModulusMismatchError, NotInvertibleError, RingElement, deserialize, gen_prime,
                       is_probable_prime, mod_inv, mod_reduce, ring_add, ring_mul, ring_sub, serialize)

GOLDEN_256 = 57896044618658097711785492504343953926634992332820282019728792003956564820063


@pytest.mark.parametrize("m,q,want", [(7, 5, 2), (0, 5, 0), (-3, 5, 2)])
def test_mod_reduce_examples(m, q, want):
    assert mod_reduce(m, q) == want


@pytest.mark.parametrize("m,q,want", [(4, 7, 2), (1, 7, 1), (16, 97, -6)])
def test_mod_inv_examples(m, q, want):
    assert mod_inv(m, q) == want


def test_mod_inv_zero():
    with pytest.raises(NotInvertibleError):
        mod_inv(0, 7)


def test_ring_ops_examples():
    M = Modulus(5)
    assert ring_add(M.element(2), M.element(-2)).value == 0
    assert ring_mul(M.element(2), M.element(2)).value == -1
    assert ring_sub(M.element(-2), M.element(2)).value == 1


def test_mismatched_moduli():
    with pytest.raises(ModulusMismatchError):
        ring_add(Modulus(5).element(1), Modulus(7).element(1))


def test_gen_prime_examples():
    assert gen_prime(8, 0).q == 131
    assert gen_prime(2, 0).q == 3
    g = gen_prime(256, 0)
    assert g.q == GOLDEN_256
    assert g.bit_length == 256 and g.log2_floor == 255


@pytest.mark.parametrize("bits", [16, 30, 64, 129])
def test_gen_prime_bits_and_seed(bits):
    a, b = gen_prime(bits, 0), gen_prime(bits, 7)
    assert a.q.bit_length() == bits == b.q.bit_length()
    assert gen_prime(bits, 7) == b


def test_primality_small():
    sieve = [p for p in range(2, 500) if all(p % d for d in range(2, int(p**0.5) + 1))]
    assert [n for n in range(500) if is_probable_prime(n)] == sieve


@given(st.integers(-10**80, 10**80), st.sampled_from([3, 5, 7, 13, 101, 2**61 - 1]))
def test_mod_reduce_centered(m, q):
    r = mod_reduce(m, q)
    assert -(q // 2) <= r < q - q // 2
    assert (r - m) % q == 0


@given(st.integers(1, 2**61 - 2))
def test_inverse_roundtrip(a):
    q = 2**61 - 1
    assert mod_reduce(a * mod_inv(a, q), q) == 1


@given(st.integers(-(2**60), 2**60))
def test_serialize_roundtrip(v):
    q = 2**61 - 1
    v = mod_reduce(v, q)
    assert deserialize(serialize(v, q), q) == v


@pytest.mark.parametrize("q", [3, 5, 7, 13, 31])
def test_field_axioms_exhaustive(q):
    M = Modulus(q)
    els = [M.element(v) for v in range(-(q // 2), q - q // 2)]
    for a in els:
        assert ring_add(a, M.element(0)) == a
        assert ring_mul(a, M.element(1)) == a
        if a.value:
            assert ring_mul(a, a.inverse()).value == 1
        for b in els:
            assert ring_add(a, b) == ring_add(b, a)
            assert ring_sub(ring_add(a, b), b) == a
