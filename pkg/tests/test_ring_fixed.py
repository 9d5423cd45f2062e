import numpy as np
import pytest

import ring_fixed as rf


def test_params_validation():
    with pytest.raises(ValueError):
        rf.RingParams(q=65, f=20)
    with pytest.raises(ValueError):
        rf.RingParams(q=40, f=20)
    p = rf.RingParams(q=64, f=20)
    assert p.modulus == 1 << 64
    assert p.one == np.uint64(1 << 20)
    assert p == rf.RingParams(q=64, f=20)
    assert p != rf.DEFAULT_PARAMS


def test_encode_decode_examples():
    p = rf.DEFAULT_PARAMS
    assert rf.encode(1.0, p) == np.uint64(1 << 20)
    assert rf.encode(-1.0, p) == np.uint64((1 << 60) - (1 << 20))
    assert rf.decode(rf.encode(0.5, p), p) == 0.5
    assert rf.decode(rf.encode(-3.25, p), p) == -3.25


def test_encode_rounds_half_away_from_zero():
    p = rf.DEFAULT_PARAMS
    lsb = 2.0 ** -20
    assert rf.to_signed(rf.encode(2.5 * lsb, p), p) == 3
    assert rf.to_signed(rf.encode(-2.5 * lsb, p), p) == -3
    assert rf.to_signed(rf.encode(2.4 * lsb, p), p) == 2


def test_encode_decode_error_is_half_lsb():
    p = rf.DEFAULT_PARAMS
    r = np.random.default_rng(0).uniform(-1000, 1000, size=5000)
    err = np.abs(rf.decode(rf.encode(r, p), p) - r)
    assert np.max(err) <= 2.0 ** -21


def test_encode_rejects_out_of_range():
    p = rf.DEFAULT_PARAMS
    with pytest.raises(rf.RangeError):
        rf.encode(2.0 ** 39, p)
    with pytest.raises(rf.RangeError):
        rf.encode(np.nan, p)
    rf.encode(2.0 ** 39 - 1, p)


def test_signed_boundary():
    p = rf.DEFAULT_PARAMS
    assert rf.to_signed(np.uint64(p.half - 1), p) == p.half - 1
    assert rf.to_signed(np.uint64(p.half), p) == -p.half
    assert rf.to_signed(p.mask, p) == -1


def test_ring_ops_wrap():
    p = rf.DEFAULT_PARAMS
    top = p.mask
    assert rf.ring_add(top, np.uint64(1), p) == 0
    assert rf.ring_sub(np.uint64(0), np.uint64(1), p) == top
    assert rf.ring_neg(np.uint64(5), p) == rf.public_int(-5, p)
    assert rf.ring_mul(rf.public_int(-3, p), np.uint64(7), p) == rf.public_int(-21, p)


def test_ring_ops_at_full_width():
    p = rf.RingParams(q=64, f=20)
    x = np.array([np.iinfo(np.uint64).max], dtype=np.uint64)
    assert rf.ring_add(x, np.uint64(2), p)[0] == 1
    assert rf.to_signed(x, p)[0] == -1
    assert rf.decode(rf.encode(-7.5, p), p) == -7.5


def test_local_truncate_is_arithmetic_shift():
    p = rf.DEFAULT_PARAMS
    prod = rf.ring_mul(rf.encode(3.0, p), rf.encode(-2.0, p), p)
    assert rf.decode(rf.local_truncate(prod, p), p) == -6.0
    assert rf.to_signed(rf.local_truncate(rf.public_int(-1, p), p, 1), p) == -1


def test_uniform_stays_in_ring():
    p = rf.RingParams(q=40, f=10)
    u = rf.uniform(np.random.default_rng(1), 10000, p)
    assert u.dtype == np.uint64
    assert np.all(u < np.uint64(1 << 40))
    # top bit of the ring is hit about half the time
    assert 0.45 < np.mean(rf.bit(u, 39)) < 0.55


def test_bit_extraction():
    x = np.array([0b1011], dtype=np.uint64)
    assert [int(rf.bit(x, i)[0]) for i in range(4)] == [1, 1, 0, 1]


@pytest.mark.parametrize('q,f', [(60, 20), (64, 20)])
def test_ring_laws_on_random_triples(q, f):
    p = rf.RingParams(q=q, f=f)
    rng = np.random.default_rng(q)
    a, b, c = (rf.uniform(rng, 10000, p) for _ in range(3))
    assert np.array_equal(rf.ring_add(a, b, p), rf.ring_add(b, a, p))
    assert np.array_equal(rf.ring_mul(a, b, p), rf.ring_mul(b, a, p))
    assert np.array_equal(rf.ring_add(rf.ring_add(a, b, p), c, p), rf.ring_add(a, rf.ring_add(b, c, p), p))
    assert np.array_equal(rf.ring_mul(rf.ring_mul(a, b, p), c, p), rf.ring_mul(a, rf.ring_mul(b, c, p), p))
    assert np.array_equal(rf.ring_mul(a, rf.ring_add(b, c, p), p),
                          rf.ring_add(rf.ring_mul(a, b, p), rf.ring_mul(a, c, p), p))
    assert np.array_equal(rf.ring_sub(rf.ring_add(a, b, p), b, p), a)


def test_encode_is_monotone():
    p = rf.DEFAULT_PARAMS
    edge = p.max_real - 1
    r = np.sort(np.concatenate([np.random.default_rng(3).uniform(-edge, edge, 20000),
                                np.random.default_rng(4).uniform(-1e-5, 1e-5, 2000), [-edge, 0.0, edge]]))
    assert np.all(np.diff(rf.to_signed(rf.encode(r, p), p)) >= 0)


def test_truncated_products_of_random_pairs():
    # q = 64 keeps |a b| 2^(2f) inside the signed range for |a|, |b| <= 2^10
    p = rf.RingParams(q=64, f=20)
    rng = np.random.default_rng(5)
    a, b = rng.uniform(-2 ** 10, 2 ** 10, 10000), rng.uniform(-2 ** 10, 2 ** 10, 10000)
    ea, eb = rf.encode(a, p), rf.encode(b, p)
    got = rf.decode(rf.local_truncate(rf.ring_mul(ea, eb, p), p), p)
    want = rf.decode(ea, p) * rf.decode(eb, p)
    assert np.max(np.abs(got - want)) <= 2.0 ** (-p.f + 1)
