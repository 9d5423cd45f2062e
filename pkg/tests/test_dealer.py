import numpy as np
import pytest

import dealer
import mpc_session
import ring_fixed as rf
import sharing
from dealer import DealerBudget
from session_config import SessionConfig

P = rf.DEFAULT_PARAMS


def _joint(x1, x2):
    return rf.as_ring(rf.ring_add(x1, x2, P), P)


def test_triples_multiply():
    t1, t2 = dealer.deal_triples(sharing.make_rng(1), 500, P)
    a, b, c = _joint(t1.a, t2.a), _joint(t1.b, t2.b), _joint(t1.c, t2.c)
    assert np.array_equal(rf.as_ring(rf.ring_mul(a, b, P), P), c)


def test_truncation_pairs_are_consistent():
    m1, m2 = dealer.deal_truncations(sharing.make_rng(2), 500, P)
    r, high, msb = _joint(m1.r, m2.r), _joint(m1.r_high, m2.r_high), _joint(m1.r_msb, m2.r_msb)
    assert np.array_equal(high, np.right_shift(np.bitwise_and(r, np.uint64(P.half - 1)), np.uint64(P.f)))
    assert np.array_equal(msb, rf.bit(r, P.q - 1))


def test_comparison_masks_hold_the_bits_of_r():
    c1, c2 = dealer.deal_masks(sharing.make_rng(3), 50, P)
    r = _joint(c1.r, c2.r)
    bits = _joint(c1.bits, c2.bits)
    assert bits.shape == (P.q, 50)
    assert set(np.unique(bits).tolist()) <= {0, 1 << P.f}
    rebuilt = np.zeros(50, dtype=np.uint64)
    for i in range(P.q):
        rebuilt += np.right_shift(bits[i], np.uint64(P.f)) << np.uint64(i)
    assert np.array_equal(rebuilt, r)


def test_comparison_mask_bits_are_unbiased():
    c1, c2 = dealer.deal_masks(sharing.make_rng(21), 2000, P)
    bits = _joint(c1.bits, c2.bits)
    assert bits.size == P.q * 2000
    assert set(np.unique(bits).tolist()) <= {0, 1 << P.f}
    ones = np.right_shift(bits, np.uint64(P.f)).astype(np.float64)
    assert abs(ones.mean() - 0.5) <= 0.01


def test_seeded_dealer_halves_match():
    d1, d2 = dealer.SeededDealer(1, 99, P), dealer.SeededDealer(2, 99, P)
    t1, t2 = d1.take_triples(10), d2.take_triples(10)
    assert np.array_equal(rf.ring_mul(_joint(t1.a, t2.a), _joint(t1.b, t2.b), P), _joint(t1.c, t2.c))
    d1.take_masks(2)
    d2.take_masks(2)
    assert d1.consumed == DealerBudget(triples=10, masks=2)


def test_budget_arithmetic():
    a = DealerBudget(3, 2, 1)
    assert a + DealerBudget(1, 1, 1) == DealerBudget(4, 3, 2)
    assert a.covers(DealerBudget(3, 0, 1))
    assert not a.covers(DealerBudget(4, 0, 0))
    assert a.random_bits(P) == P.q
    assert DealerBudget().is_empty()
    with pytest.raises(ValueError):
        DealerBudget(-1, 0, 0)


def test_generate_and_read_files(tmp_path):
    paths = (str(tmp_path / 'p1.bin'), str(tmp_path / 'p2.bin'))
    budget = DealerBudget(triples=20, truncations=7, masks=3)
    dealer.generate(budget, 42, paths, P)
    party, params, available = dealer.read_header(paths[0])
    assert (party, params, available) == (1, P, budget)

    c1, c2 = dealer.FileDealerCursor(paths[0], 1, P), dealer.FileDealerCursor(paths[1], 2, P)
    t1, t2 = c1.take_triples(20), c2.take_triples(20)
    assert np.array_equal(rf.ring_mul(_joint(t1.a, t2.a), _joint(t1.b, t2.b), P), _joint(t1.c, t2.c))
    m1, m2 = c1.take_masks(3), c2.take_masks(3)
    r = _joint(m1.r, m2.r)
    assert np.array_equal(np.right_shift(_joint(m1.bits, m2.bits)[P.q - 1], np.uint64(P.f)), rf.bit(r, P.q - 1))
    c1.take_truncations(7)
    with pytest.raises(dealer.DealerExhaustedError):
        c1.take_truncations(1)
    with pytest.raises(dealer.DealerExhaustedError):
        c1.take_triples(1)
    c1.close()
    c2.close()


def test_generate_is_deterministic(tmp_path):
    budget = DealerBudget(triples=5, truncations=5, masks=1)
    first = dealer.generate(budget, 7, (str(tmp_path / 'a1'), str(tmp_path / 'a2')), P)
    second = dealer.generate(budget, 7, (str(tmp_path / 'b1'), str(tmp_path / 'b2')), P)
    for x, y in zip(first, second):
        assert open(x, 'rb').read() == open(y, 'rb').read()


def test_file_checks(tmp_path):
    paths = (str(tmp_path / 'p1.bin'), str(tmp_path / 'p2.bin'))
    dealer.generate(DealerBudget(triples=4), 1, paths, P)
    with pytest.raises(dealer.MaterialFileError):
        dealer.FileDealerCursor(paths[0], 2, P)
    with pytest.raises(dealer.MaterialFileError):
        dealer.FileDealerCursor(paths[0], 1, rf.RingParams(q=64, f=20))

    raw = bytearray(open(paths[0], 'rb').read())
    raw[dealer.DEALER_HEADER.size] = 99  # tag of the first triple
    open(paths[0], 'wb').write(bytes(raw))
    with pytest.raises(dealer.MaterialFileError):
        dealer.FileDealerCursor(paths[0], 1, P).take_triples(1)

    open(paths[1], 'wb').write(b'NOTADEALERFILE' * 10)
    with pytest.raises(dealer.MaterialFileError):
        dealer.read_header(paths[1])
    with pytest.raises(ValueError):
        dealer.generate(DealerBudget(), 1, paths, P)


@pytest.mark.parametrize('algorithm,variant', [('3est', 'h'), ('3est', 'base'), ('cosine', 'fast')])
def test_estimate_matches_consumption(algorithm, variant):
    A = np.array([[1, -1, 0, 1], [1, 1, -1, 0], [-1, 1, 1, 1]])
    session = SessionConfig(algorithm=algorithm, variant=variant, iters=2, n=3, k=4, dealer_seed=5)
    run = mpc_session.run_loopback(A, session, input_seed=6)
    expected = dealer.estimate_budget(algorithm, variant, 3, 4, 2, P, session.newton_config(), session.truncation)
    assert run.parties[0].consumed == expected
    assert run.parties[1].consumed == expected
    # only min-max normalization and the signed Cosine division compare
    if variant in ('h', 'fast'):
        assert expected.masks == 0
    else:
        assert expected.masks > 0


def test_zero_iterations_only_pays_the_precompute():
    budget = dealer.estimate_budget('3est', 'h', 3, 4, 0, P)
    assert budget == DealerBudget(triples=12, truncations=12, masks=0)
