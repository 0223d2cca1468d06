"""Field arithmetic against independent oracles and algebraic laws."""

import random

import numpy as np
import pytest

from porcrs.errors import FieldMismatchError, ParameterError
from porcrs.field import (
    MERSENNE61,
    binary_field,
    field_from_token,
    is_prime,
    prime_field,
)


def egcd_inverse(a: int, p: int) -> int:
    """Extended-Euclid inverse, independent of the field implementation."""
    old_r, r = a % p, p
    old_s, s = 1, 0
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
    assert old_r == 1
    return old_s % p


def clmul_reduce(a: int, b: int, poly: int, w: int) -> int:
    """Carry-less multiply then polynomial reduction, bit by bit."""
    acc = 0
    for bit in range(w):
        if (b >> bit) & 1:
            acc ^= a << bit
    for bit in range(2 * w - 2, w - 1, -1):
        if (acc >> bit) & 1:
            acc ^= poly << (bit - w)
    return acc


Z11 = prime_field(11)
GF8 = binary_field(8)
GF16 = binary_field(16)
M61 = prime_field()


def test_z11_examples():
    assert Z11.add(8, 5) == 2
    assert Z11.mul(7, 8) == 1
    assert Z11.inv(7) == egcd_inverse(7, 11) == 8


def test_identities():
    rng = random.Random(0)
    for fld in (Z11, GF8, GF16, M61):
        for _ in range(50):
            a = fld.rand_element(rng)
            assert fld.add(a, 0) == a
            assert fld.mul(a, 1) == a
        assert fld.inv(1) == 1


def test_gf8_self_cancellation():
    rng = random.Random(1)
    for _ in range(200):
        a = rng.getrandbits(8)
        assert GF8.add(a, a) == 0


def test_gf8_multiply_matches_clmul_oracle():
    assert GF8.mul(0x02, 0x80) == clmul_reduce(0x02, 0x80, 0x11D, 8) == 0x1D
    rng = random.Random(2)
    for _ in range(500):
        a, b = rng.getrandbits(8), rng.getrandbits(8)
        assert GF8.mul(a, b) == clmul_reduce(a, b, 0x11D, 8)


def test_gf16_multiply_matches_clmul_oracle():
    rng = random.Random(3)
    for _ in range(500):
        a, b = rng.getrandbits(16), rng.getrandbits(16)
        assert GF16.mul(a, b) == clmul_reduce(a, b, 0x1100B, 16)


def test_gf16_inverse_property():
    rng = random.Random(4)
    for _ in range(1000):
        a = GF16.rand_nonzero(rng)
        assert GF16.mul(a, GF16.inv(a)) == 1


def test_prime_inverse_matches_egcd_oracle():
    rng = random.Random(5)
    for _ in range(200):
        a = M61.rand_nonzero(rng)
        assert M61.inv(a) == egcd_inverse(a, MERSENNE61)
        assert M61.mul(a, M61.inv(a)) == 1


def test_zero_inverse_is_reported():
    for fld in (Z11, GF8, GF16, M61):
        with pytest.raises(ZeroDivisionError):
            fld.inv(0)


@pytest.mark.parametrize("fld", [Z11, GF8, GF16, M61], ids=lambda f: f.token)
def test_ring_laws_on_random_triples(fld):
    rng = random.Random(6)
    for _ in range(10_000):
        a, b, c = (fld.rand_element(rng) for _ in range(3))
        assert fld.add(a, b) == fld.add(b, a)
        assert fld.mul(a, b) == fld.mul(b, a)
        assert fld.add(fld.add(a, b), c) == fld.add(a, fld.add(b, c))
        assert fld.mul(fld.mul(a, b), c) == fld.mul(a, fld.mul(b, c))
        assert fld.mul(a, fld.add(b, c)) == fld.add(fld.mul(a, b), fld.mul(a, c))


def test_binary_add_is_xor():
    rng = random.Random(7)
    for fld in (GF8, GF16):
        for _ in range(500):
            a, b = fld.rand_element(rng), fld.rand_element(rng)
            assert fld.add(a, b) == a ^ b
            assert fld.sub(a, b) == a ^ b


def test_element_from_wide_bytes():
    assert M61.element_from_wide_bytes(b"\x00" * 16) == 0
    assert M61.element_from_wide_bytes(MERSENNE61.to_bytes(16, "big")) == 0
    assert GF8.element_from_wide_bytes((0x0102).to_bytes(16, "big")) == 0x02
    assert GF16.element_from_wide_bytes((0x30102).to_bytes(16, "big")) == 0x0102
    with pytest.raises(ParameterError):
        M61.element_from_wide_bytes(b"\x00" * 15)


def test_wide_bytes_matches_big_integer_reduction():
    rng = random.Random(8)
    for _ in range(200):
        raw = rng.getrandbits(128).to_bytes(16, "big")
        n = int.from_bytes(raw, "big")
        assert M61.element_from_wide_bytes(raw) == n % MERSENNE61
        assert GF16.element_from_wide_bytes(raw) == n & 0xFFFF


def test_tokens_round_trip():
    for fld in (Z11, GF8, GF16, M61):
        assert field_from_token(fld.token) is fld
    with pytest.raises(ParameterError):
        field_from_token("zp:abc")
    with pytest.raises(ParameterError):
        field_from_token("nope:8")


def test_bad_field_parameters_rejected():
    with pytest.raises(ParameterError):
        prime_field(9)  # composite
    with pytest.raises(ParameterError):
        prime_field(2)  # even
    with pytest.raises(ParameterError):
        prime_field((1 << 62) + 57)  # too wide
    with pytest.raises(ParameterError):
        binary_field(12)


def test_is_prime_against_small_sieve():
    sieve = {n for n in range(2, 2000) if all(n % d for d in range(2, n))}
    for n in range(2000):
        assert is_prime(n) == (n in sieve)


def test_check_element_range():
    with pytest.raises(FieldMismatchError):
        Z11.check_element(11)
    with pytest.raises(FieldMismatchError):
        GF8.check_element(-1)
    assert GF8.check_element(255) == 255


@pytest.mark.parametrize("fld", [Z11, GF16, M61], ids=lambda f: f.token)
def test_vector_ops_match_scalar_ops(fld):
    rng = random.Random(9)
    c = 5
    for _ in range(100):
        u = fld.vec_from_ints([fld.rand_element(rng) for _ in range(c)])
        v = fld.vec_from_ints([fld.rand_element(rng) for _ in range(c)])
        s = fld.rand_element(rng)
        assert fld.vec_to_ints(fld.vec_add(u, v)) == [
            fld.add(a, b) for a, b in zip(fld.vec_to_ints(u), fld.vec_to_ints(v))
        ]
        assert fld.vec_to_ints(fld.vec_sub(u, v)) == [
            fld.sub(a, b) for a, b in zip(fld.vec_to_ints(u), fld.vec_to_ints(v))
        ]
        assert fld.vec_to_ints(fld.vec_scale(s, u)) == [
            fld.mul(s, a) for a in fld.vec_to_ints(u)
        ]
        combo = fld.vec_combine([s, 1], [u, v])
        expect = [
            fld.add(fld.mul(s, a), b)
            for a, b in zip(fld.vec_to_ints(u), fld.vec_to_ints(v))
        ]
        assert fld.vec_to_ints(combo) == expect


def test_vec_combine_accepts_stacked_matrix():
    rng = random.Random(10)
    vecs = [GF16.vec_from_ints([rng.getrandbits(16) for _ in range(8)]) for _ in range(6)]
    coeffs = [rng.getrandbits(16) for _ in range(6)]
    a = GF16.vec_combine(coeffs, vecs)
    b = GF16.vec_combine(coeffs, np.stack(vecs))
    assert GF16.vec_eq(a, b)


def test_payload_round_trip():
    rng = random.Random(11)
    for fld, nbytes in ((M61, 7 * 9), (GF8, 13), (GF16, 26)):
        data = rng.randbytes(nbytes)
        vec = fld.chunks_from_payload(data)
        assert fld.chunks_to_payload(vec) == data
    with pytest.raises(ParameterError):
        GF16.chunks_from_payload(b"\x00" * 3)
    with pytest.raises(ParameterError):
        Z11.chunks_from_payload(b"ab")  # toy modulus carries no payload
