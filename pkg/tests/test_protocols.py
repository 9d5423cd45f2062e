import numpy as np
import portion
import pytest
from scipy import stats

import protocols
import ring_fixed as rf
import sharing
from protocols import NewtonConfig

Q64 = rf.RingParams(q=64, f=20)
LSB = 2.0 ** -20


def _mul(ctx, x, y):
    return protocols.mul(ctx, x, y)


def test_mul_small_integers_and_zero(pair):
    got = pair.reveal(_mul, np.array([3.0, -2.5, 7.0]), np.array([4.0, 2.0, 0.0]))
    assert np.allclose(got, [12.0, -5.0, 0.0], atol=2.0 ** -19)
    assert got[2] == 0.0


def test_mul_grid_fixed_point_error(make_pair):
    pair = make_pair(params=Q64)
    rng = np.random.default_rng(21)
    x = rf.decode(rf.encode(rng.uniform(-2 ** 10, 2 ** 10, 10000), Q64), Q64)
    y = rf.decode(rf.encode(rng.uniform(-2 ** 10, 2 ** 10, 10000), Q64), Q64)
    got = pair.reveal(_mul, x, y)
    assert np.max(np.abs(got - x * y)) <= 2.0 ** -19


def test_mul_rounds(make_pair):
    dealer_mode = make_pair()
    dealer_mode.reveal(_mul, np.ones(50), np.ones(50))
    assert dealer_mode.stats.rounds == 2
    local = make_pair(truncation='local')
    got = local.reveal(_mul, np.array([1.5, -3.0]), np.array([2.0, 0.25]))
    assert local.stats.rounds == 1
    assert np.allclose(got, [3.0, -0.75], atol=2 * LSB)


def test_truncation_is_exact_for_whole_multiples(pair):
    p = pair.params

    def trunc(ctx, x):
        return protocols.truncate_product(ctx, x)

    values = rf.ring_mul(rf.encode(np.array([-3.0, 0.0, 5.5, 1e4]), p), np.uint64(1 << 20), p)
    got = pair.reveal(trunc, values, encoded=True)
    assert got.tolist() == [-3.0, 0.0, 5.5, 1e4]


def test_dealer_truncation_error_bound(pair):
    p = pair.params
    raw = np.random.default_rng(3).integers(-2 ** 50, 2 ** 50, 2000)
    out1, out2 = pair.run(protocols.truncate_product, rf.public_int(raw, p), encoded=True)
    got = rf.to_signed(sharing.reconstruct(out1, out2), p)
    diff = got - np.floor_divide(raw, 1 << 20)
    assert set(np.unique(diff).tolist()) <= {0, 1}


def test_scale_public_constants(pair):
    def run(ctx, x):
        return (protocols.scale(ctx, x, 3), protocols.scale(ctx, x, 0.5), protocols.scale(ctx, x, -0.75),
                protocols.scale(ctx, x, 0.2))

    x = np.array([1.0, -2.0, 0.3])
    times3, half, neg, fifth = pair.reveal(run, x)
    assert np.allclose(times3, 3 * x, atol=4 * LSB)
    assert np.allclose(half, 0.5 * x, atol=2 * LSB)
    assert np.allclose(neg, -0.75 * x, atol=2 * LSB)
    assert np.allclose(fifth, 0.2 * x, atol=3 * LSB)
    # only the non-dyadic constant needs the truncation round
    assert pair.stats.rounds == 1


def test_newton_config_validation():
    cfg = NewtonConfig()
    assert cfg.inv_iters == 30 and cfg.sqrt_iters == 30
    assert cfg.inv_domain == portion.open(2 ** -12, 2 ** 12)
    assert NewtonConfig(**cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        NewtonConfig(inv_iters=0)
    with pytest.raises(ValueError):
        NewtonConfig(lower=2 ** 13)


def test_iteration_counts_follow_the_domain():
    assert protocols.inv_start_exponent(portion.closed(1, 5)) == 3
    assert protocols.sqrt_start_exponent(portion.open(0.01, 2)) == 1
    small = protocols.newton_inv_iterations(portion.closed(1, 2))
    wide = protocols.newton_inv_iterations(portion.open(2 ** -12, 2 ** 12))
    assert small < wide <= 30
    assert protocols.newton_sqrt_iterations(portion.open(2 ** -10, 2)) > 1
    with pytest.raises(ValueError):
        protocols.newton_inv_iterations(portion.open(-1, 2))
    with pytest.raises(ValueError):
        protocols.newton_inv_iterations(portion.open(1, 2) | portion.open(3, 4))


def test_inv_examples_and_sweep(pair):
    sweep = np.logspace(-6, 6, 50, base=2.0)
    x = np.concatenate([[4.0, 1.0], sweep])
    got = pair.reveal(protocols.inv, x)
    assert np.max(np.abs(got * x - 1.0)) <= 2.0 ** -10


def test_inv_with_a_tight_domain(pair):
    counts = np.arange(1.0, 31.0)

    def run(ctx, x):
        return protocols.inv(ctx, x, portion.closed(1, 30))

    got = pair.reveal(run, counts)
    assert np.max(np.abs(got * counts - 1.0)) <= 2.0 ** -12


def test_sqrt_examples_and_sweep(pair):
    sweep = np.logspace(-6, 6, 50, base=2.0)
    x = np.concatenate([[9.0, 1.0], sweep])

    def run(ctx, v):
        return protocols.sqrt_inv(ctx, v), protocols.sqrt(ctx, v)

    inv_root, root = pair.reveal(run, x)
    assert np.max(np.abs(inv_root * np.sqrt(x) - 1.0)) <= 2.0 ** -8
    assert np.max(np.abs(root / np.sqrt(x) - 1.0)) <= 2.0 ** -8
    assert abs(root[0] - 3.0) <= 3.0 * 2.0 ** -8
    assert np.max(np.abs(root ** 2 / x - 1.0)) <= 2.0 ** -7


def test_inv_square_trick_handles_both_signs(pair):
    x = np.array([-4.0, -0.5, 0.5, 2.0, 7.0])

    def run(ctx, v):
        return protocols.inv_square_trick(ctx, v, portion.open(0.1, 64))

    got = pair.reveal(run, x)
    assert np.max(np.abs(got * x - 1.0)) <= 2.0 ** -10


def test_newton_rounds_do_not_depend_on_size(make_pair):
    small, large = make_pair(), make_pair()
    small.reveal(protocols.inv, np.array([3.0]))
    large.reveal(protocols.inv, np.linspace(0.5, 100, 200))
    assert small.stats.rounds == large.stats.rounds == 4 * (NewtonConfig().inv_iters - 1)


@pytest.mark.parametrize('kappa', [-1, 0, 1])
def test_eq_poly_table_is_exact(pair, kappa):
    z = np.array([-1.0, 0.0, 1.0])

    def run(ctx, v):
        return protocols.eq_poly(ctx, v, kappa)

    out1, out2 = pair.run(run, z)
    got = sharing.reconstruct(out1, out2)
    want = rf.encode((z == kappa).astype(np.float64), pair.params)
    assert np.array_equal(got, want)


def test_indicators_cost_one_squaring_for_any_size(make_pair):
    for size in (3, 3000):
        pair = make_pair()
        z = np.random.default_rng(size).integers(-1, 2, size).astype(np.float64)
        sigma, tau, z_sq = pair.reveal(lambda ctx, v: tuple(protocols.indicators(ctx, v)), z)
        assert np.array_equal(sigma, (z == 1).astype(np.float64))
        assert np.array_equal(tau, (z == -1).astype(np.float64))
        assert np.array_equal(z_sq, (z != 0).astype(np.float64))
        assert pair.stats.rounds == 2
        assert pair.counters['mul'] == 1


def test_conditioned_sum_examples(pair):
    def run(ctx, t, z):
        return protocols.conditioned_sum(ctx, t, z, 1)

    assert abs(pair.reveal(run, np.array([0.5, 2.0, -1.0]), np.array([1.0, 0.0, 1.0])) + 0.5) <= 2.0 ** -19
    assert pair.reveal(run, np.array([0.5, 2.0]), np.array([0.0, -1.0])) == 0.0
    with pytest.raises(ValueError):
        protocols.conditioned_sum(pair.contexts[0], pair.contexts[0].zeros(2), pair.contexts[0].zeros(3), 1)


def test_conditioned_sum_against_a_loop(pair):
    rng = np.random.default_rng(8)
    for _ in range(25):
        size = int(rng.integers(1, 33))
        kappa = int(rng.integers(-1, 2))
        t = rng.uniform(-10, 10, size)
        z = rng.integers(-1, 2, size).astype(np.float64)

        def run(ctx, tt, zz):
            return protocols.conditioned_sum(ctx, tt, zz, kappa)

        want = sum(ti for ti, zi in zip(t, z) if zi == kappa)
        assert abs(pair.reveal(run, t, z) - want) <= 32 * 2.0 ** -19


def test_party_one_view_does_not_depend_on_the_secret(make_pair):
    frames = []
    for secret in (0.0, 17.25):
        pair = make_pair(seed=77)
        pair.contexts[0].channel.transcript = []
        pair.run(_mul, np.full(4000, secret), np.full(4000, 3.0))
        frames.append(pair.contexts[0].channel.transcript)
    # the Beaver opening is the share of x - a, uniform whatever x is
    first = [values for _, values in (frames[0][0], frames[1][0])]
    assert np.array_equal(first[0], first[1])
    top = np.right_shift(frames[1][1][1], np.uint64(56)).astype(np.int64)
    assert stats.chisquare(np.bincount(top, minlength=16)).pvalue > 1e-3
