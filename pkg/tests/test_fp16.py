import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fflp import fp16
from fflp.fp16 import Half

from oracle import oracle_add, oracle_mul, round_f64_to_f16_bits

ALL_BITS = np.arange(1 << 16, dtype=np.uint16)


def test_roundtrip_all_patterns():
    for b in range(1 << 16):
        h = Half.from_bits(b)
        assert h.bits == b
    # float round-trip for everything that has a unique value
    floats = fp16.from_bits_array(ALL_BITS)
    back = fp16.to_bits_array(floats)
    assert np.array_equal(back, ALL_BITS)


def test_special_values_survive():
    for b in (0x0000, 0x8000, 0x7C00, 0xFC00, 0x7E00, 0x0001, 0x03FF, 0x0400):
        assert Half.from_bits(b).bits == b
    assert Half.from_bits(0x7E01).is_nan()
    assert np.isinf(float(Half.from_bits(0xFC00)))


def test_add_trivial_examples():
    assert (Half(1.0) + Half(-1.0)).bits == 0x0000  # exact cancellation -> +0
    assert Half(2048.0) + Half(1.0) == Half(2048.0)  # RNE keeps even significand
    assert Half(0.5) + Half(0.25) == Half(0.75)


def test_add_2048_plus_one_oracle():
    # 2049 is not representable at exponent 11; the oracle confirms the
    # round-to-even choice between 2048 and 2050.
    got = oracle_add(
        np.array([Half(2048.0).bits], dtype=np.uint16),
        np.array([Half(1.0).bits], dtype=np.uint16),
    )[0]
    assert got == Half(2048.0).bits


def test_mul_trivial_examples():
    rng = np.random.default_rng(0)
    xs = rng.integers(0, 1 << 16, size=500, dtype=np.uint16)
    one = Half(1.0)
    for xb in xs:
        x = Half.from_bits(int(xb))
        if x.is_nan() or fp16.is_zero_bits(x.bits):
            continue
        assert (x * one).bits == x.bits
    assert Half(0.5) * Half(0.5) == Half(0.25)


def test_mul_third_times_three():
    third = Half(1.0 / 3.0)
    got = (third * Half(3.0)).bits
    want = oracle_mul(
        np.array([third.bits], dtype=np.uint16),
        np.array([Half(3.0).bits], dtype=np.uint16),
    )[0]
    assert got == want


def _sample_bits(rng, n):
    return rng.integers(0, 1 << 16, size=n, dtype=np.uint16)


def test_add_matches_oracle_sampled():
    rng = np.random.default_rng(42)
    a, b = _sample_bits(rng, 20000), _sample_bits(rng, 20000)
    want = oracle_add(a, b)
    for ab, bb, wb in zip(a, b, want):
        assert add_canonical(int(ab), int(bb)) == int(wb)


def add_canonical(a, b):
    r = fp16.add_bits(a, b)
    return fp16.QNAN_BITS if fp16.is_nan_bits(r) else r


def mul_canonical(a, b):
    r = fp16.mul_bits(a, b)
    return fp16.QNAN_BITS if fp16.is_nan_bits(r) else r


def test_mul_matches_oracle_sampled():
    rng = np.random.default_rng(43)
    a, b = _sample_bits(rng, 20000), _sample_bits(rng, 20000)
    want = oracle_mul(a, b)
    for ab, bb, wb in zip(a, b, want):
        assert mul_canonical(int(ab), int(bb)) == int(wb)


def test_vector_route_matches_scalar_route():
    rng = np.random.default_rng(7)
    a, b = _sample_bits(rng, 20000), _sample_bits(rng, 20000)
    av, bv = fp16.from_bits_array(a), fp16.from_bits_array(b)
    vsum = fp16.to_bits_array(fp16.vadd(av, bv))
    vprod = fp16.to_bits_array(fp16.vmul(av, bv))
    for ab, bb, sv, pv in zip(a, b, vsum, vprod):
        s = fp16.add_bits(int(ab), int(bb))
        p = fp16.mul_bits(int(ab), int(bb))
        if not fp16.is_nan_bits(s):
            assert s == int(sv)
        else:
            assert fp16.is_nan_bits(int(sv))
        if not fp16.is_nan_bits(p):
            assert p == int(pv)
        else:
            assert fp16.is_nan_bits(int(pv))


def test_halve_equals_mul_by_half_exhaustive():
    half_bits = Half(0.5).bits
    for b in range(1 << 16):
        assert fp16.halve_bits(b) == fp16.mul_bits(b, half_bits), hex(b)


def test_halve_examples():
    assert Half(1.0).halve() == Half(0.5)
    assert Half.from_bits(0x0000).halve().bits == 0x0000  # +0 stays +0
    assert Half.from_bits(0x8000).halve().bits == 0x8000
    # smallest normal 2^-14 halves to the top subnormal range
    smallest_normal = Half.from_bits(0x0400)
    assert smallest_normal.halve().bits == 0x0200


def test_add_commutative():
    rng = np.random.default_rng(11)
    a, b = _sample_bits(rng, 5000), _sample_bits(rng, 5000)
    for ab, bb in zip(a, b):
        assert add_canonical(int(ab), int(bb)) == add_canonical(int(bb), int(ab))


def test_nan_canonicalization():
    weird_nan = 0x7C01
    assert fp16.add_bits(weird_nan, Half(1.0).bits) == fp16.QNAN_BITS
    assert fp16.mul_bits(weird_nan, weird_nan) == fp16.QNAN_BITS
    assert fp16.add_bits(fp16.POS_INF_BITS, fp16.NEG_INF_BITS) == fp16.QNAN_BITS
    assert fp16.mul_bits(fp16.POS_INF_BITS, 0x0000) == fp16.QNAN_BITS


def test_fused_psum():
    acc, w = Half(0.5), Half(0.25)
    assert fp16.fused_psum(acc, w, 0) == acc
    assert fp16.fused_psum(acc, w, 1) == Half(0.75)
    with pytest.raises(ValueError):
        fp16.fused_psum(acc, w, 2)
    rng = np.random.default_rng(3)
    a, b = _sample_bits(rng, 2000), _sample_bits(rng, 2000)
    for ab, bb in zip(a, b):
        assert fp16.fused_psum_bits(int(ab), int(bb), 1) == fp16.add_bits(
            int(ab), int(bb)
        )


@given(st.integers(0, 0xFFFF), st.integers(0, 0xFFFF))
@settings(max_examples=300, deadline=None)
def test_add_matches_oracle_property(a, b):
    want = int(oracle_add(np.array([a], dtype=np.uint16), np.array([b], dtype=np.uint16))[0])
    assert add_canonical(a, b) == want


@given(st.integers(0, 0xFFFF), st.integers(0, 0xFFFF))
@settings(max_examples=300, deadline=None)
def test_mul_matches_oracle_property(a, b):
    want = int(oracle_mul(np.array([a], dtype=np.uint16), np.array([b], dtype=np.uint16))[0])
    assert mul_canonical(a, b) == want


def test_rounding_double_to_half_matches_numpy_cast():
    rng = np.random.default_rng(5)
    xs = rng.normal(scale=100.0, size=20000)
    xs = np.concatenate([xs, rng.normal(scale=1e-6, size=5000), [0.0, -0.0, 65504.0, 65520.0, -65520.0, 1e9]])
    ours = round_f64_to_f16_bits(xs)
    theirs = xs.astype(np.float16).view(np.uint16)
    assert np.array_equal(ours, theirs)
