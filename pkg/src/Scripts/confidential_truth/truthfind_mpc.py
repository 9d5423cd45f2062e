import logging
import xmlrpc.client
from typing import NamedTuple, Optional

import numpy as np
import portion

import compare
import constants as cs
import dealer
import protocols
import ring_fixed as rf
import sharing
import transport
import truthfind_plain as tp
from protocols import MpcContext, mul
from sharing import SharedVector

LOG = logging.getLogger(__name__)

# theta and delta after either normalization (and some slack for the h map)
UNIT_DOMAIN = portion.open(2 ** -5, 4)
# lower end of the mean of y^2 over the facts a source answered
COSINE_SQ_LOWER = 2 ** -10
# slack on |theta| <= 1 and |y| <= bound when checking released outputs
RELEASE_TOLERANCE = 1e-3


# test written
class SharedAnswerMatrix(object):
    """One party's shares of the n x k answer matrix, row-major, plus the public sizes."""
    __slots__ = ("shares", "n", "k")

    def __init__(self, shares: SharedVector, n, k):
        if shares.length != n * k:
            raise ValueError('Expected {}x{}={} shares, got {}'.format(n, k, n * k, shares.length))
        self.shares = shares.ravel()
        self.n = int(n)
        self.k = int(k)

    def __repr__(self):
        return "(SharedAnswerMatrix:P{} {}x{})".format(self.shares.owner, self.n, self.k)

    @property
    def owner(self):
        return self.shares.owner

    @property
    def matrix(self) -> SharedVector:
        return self.shares.reshape(self.n, self.k)


def share_answers(A, rng: np.random.Generator, params: rf.RingParams = rf.DEFAULT_PARAMS):
    """Encode and split a validated answer matrix into the two servers' inputs."""
    A = tp.answer_matrix(A)
    n, k = A.shape
    s1, s2 = sharing.split(rf.encode(A.ravel(), params), rng, params)
    return SharedAnswerMatrix(s1, n, k), SharedAnswerMatrix(s2, n, k)


class SharedTruthState(NamedTuple):
    y: SharedVector
    theta: SharedVector
    delta: Optional[SharedVector] = None


def _normalize(ctx: MpcContext, x: SharedVector, config: tp.AlgoConfig) -> SharedVector:
    if config.normalization == 'linear_h':
        return protocols.scale(ctx, x, 0.5).add_public(rf.encode(0.25, ctx.params))
    return compare.minmax_normalize(ctx, x, config.eps)


def _one_minus(ctx: MpcContext, x: SharedVector) -> SharedVector:
    return (-x).add_public(ctx.params.one)


def _count_inverses(ctx: MpcContext, counts: SharedVector, top) -> SharedVector:
    return protocols.inv(ctx, counts, portion.closed(1, max(top, 2)))


def three_estimates_mpc(A: SharedAnswerMatrix, config: tp.AlgoConfig, ctx: MpcContext, iters=None):
    """3-Estimates over shares. Same arithmetic as the plain step, regrouped so that each block is three
    rounds of products plus one reciprocal:
        y     = (sum_i sigma - delta * sum_i v theta) / nbViews
        delta = ((1 - y) sum_i sigma / theta + y sum_i tau / theta) / nbViews
        theta = (sum_j sigma (1 - y) / delta + tau y / delta) / nbFacts
    The indicators come from a single squaring before the loop."""
    iters = config.iters if iters is None else iters
    n, k = A.n, A.k
    z = A.matrix
    ind = protocols.indicators(ctx, z)
    sigma_tau = SharedVector.concat([ind.sigma.reshape(1, n, k), ind.tau.reshape(1, n, k)])
    positives = ind.sigma.sum(axis=0)
    counts = SharedVector.concat([ind.z_sq.sum(axis=0), ind.z_sq.sum(axis=1)])

    theta = ctx.public(np.full(n, config.theta0))
    delta = ctx.public(np.full(k, config.delta0))
    y = ctx.zeros(k)
    inv_views = inv_facts = None
    for _ in range(iters):
        start = ctx.rounds
        if inv_views is None:
            inverses = _count_inverses(ctx, counts, max(n, k))
            inv_views, inv_facts = inverses[:k], inverses[k:]

        # truth
        weighted = mul(ctx, z, theta.reshape(n, 1).broadcast_to((n, k))).sum(axis=0)
        y = mul(ctx, positives - mul(ctx, delta, weighted), inv_views)
        y = _normalize(ctx, y, config)
        not_y_and_y = SharedVector.concat([_one_minus(ctx, y).reshape(1, k), y.reshape(1, k)])

        # difficulty
        inv_theta = protocols.inv(ctx, theta, UNIT_DOMAIN)
        per_fact = mul(ctx, sigma_tau, inv_theta.reshape(1, n, 1).broadcast_to((2, n, k))).sum(axis=1)
        delta = mul(ctx, mul(ctx, not_y_and_y, per_fact).sum(axis=0), inv_views)
        delta = _normalize(ctx, delta, config)

        # untrustworthiness
        inv_delta = protocols.inv(ctx, delta, UNIT_DOMAIN)
        weights = mul(ctx, not_y_and_y, inv_delta.reshape(1, k).broadcast_to((2, k)))
        per_source = mul(ctx, sigma_tau, weights.reshape(2, 1, k).broadcast_to((2, n, k))).sum(axis=2).sum(axis=0)
        theta = _normalize(ctx, mul(ctx, per_source, inv_facts), config)
        ctx.log_iteration(start)
    return SharedTruthState(y, theta, delta)


def cosine_y_bound(config: tp.AlgoConfig) -> float:
    """Public bound on |y|. With signed inversion y is a weighted mean of answers, so |y| <= 1; the fast
    variant is only run on data whose trust sums keep |y| <= COSINE_FAST_Y_BOUND."""
    return 1.0 if config.inversion == 'signed' else float(cs.COSINE_FAST_Y_BOUND)


def cosine_sq_domain(config: tp.AlgoConfig):
    # twice the squared bound leaves room for fixed-point noise
    return portion.open(COSINE_SQ_LOWER, 2 * cosine_y_bound(config) ** 2)


def _cosine_similarity(ctx: MpcContext, z, answered, y, inv_facts, sq_domain):
    n, k = z.shape
    y_sq = mul(ctx, y, y)
    rows = SharedVector.concat([y.reshape(1, 1, k), y_sq.reshape(1, 1, k)]).broadcast_to((2, n, k))
    sums = mul(ctx, SharedVector.concat([z.reshape(1, n, k), answered.reshape(1, n, k)]), rows).sum(axis=2)
    means = mul(ctx, sums, inv_facts.reshape(1, n).broadcast_to((2, n)))
    return mul(ctx, means[0], protocols.sqrt_inv(ctx, means[1], sq_domain))


def _cosine_truth(ctx: MpcContext, z, answered, theta, config: tp.AlgoConfig):
    n, k = z.shape
    powered = mul(ctx, mul(ctx, theta, theta), theta) if config.power == 'cubic' else theta
    stacked = SharedVector.concat([z.reshape(1, n, k), answered.reshape(1, n, k)])
    if config.inversion == 'signed':
        magnitude = mul(ctx, compare.sign(ctx, theta), powered)
        weights = SharedVector.concat([powered.reshape(1, n, 1), magnitude.reshape(1, n, 1)])
        num_den = mul(ctx, stacked, weights.broadcast_to((2, n, k))).sum(axis=1)
        inv_den = compare.signed_inv(ctx, num_den[1], portion.open(cs.COSINE_DEN_LOWER, n + 1))
    else:
        num_den = mul(ctx, stacked, powered.reshape(1, n, 1).broadcast_to((2, n, k))).sum(axis=1)
        inv_den = protocols.inv_square_trick(ctx, num_den[1], portion.open(cs.COSINE_DEN_LOWER ** 2, (n + 1) ** 2))
    return mul(ctx, num_den[0], inv_den)


def cosine_mpc(A: SharedAnswerMatrix, config: tp.AlgoConfig, ctx: MpcContext, iters=None):
    """Cosine over shares. The answered-indicator is one squaring; the counts are inverted once.

    Trust stays in [-1, 1] (it is a running mean of cosines). The fast variant divides by the signed trust sum
    D of the sources answering each fact, with no sign available, so its public domains assume that on every
    iteration |D| >= max(COSINE_DEN_LOWER, S / COSINE_FAST_Y_BOUND), S being the sum of |trust| over the same
    sources. Data where trusted and distrusted sources cancel on some fact breaks that and the outputs are
    meaningless; truthfind_plain.fast_cosine_slack checks the condition and check_release flags the symptom."""
    sq_domain = cosine_sq_domain(config)
    iters = config.iters if iters is None else iters
    n, k = A.n, A.k
    z = A.matrix
    answered = mul(ctx, z, z)
    inverses = _count_inverses(ctx, SharedVector.concat([answered.sum(axis=0), answered.sum(axis=1)]), max(n, k))
    inv_views, inv_facts = inverses[:k], inverses[k:]

    y = mul(ctx, z.sum(axis=0), inv_views)
    theta = _cosine_similarity(ctx, z, answered, y, inv_facts, sq_domain)
    for _ in range(iters):
        start = ctx.rounds
        y = _cosine_truth(ctx, z, answered, theta, config)
        agreement = _cosine_similarity(ctx, z, answered, y, inv_facts, sq_domain)
        theta = theta + protocols.scale(ctx, agreement - theta, config.eta)
        ctx.log_iteration(start)
    return SharedTruthState(y, theta, None)


def run_program(A: SharedAnswerMatrix, config: tp.AlgoConfig, ctx: MpcContext, iters=None) -> SharedTruthState:
    if A.owner != ctx.party:
        raise sharing.PartyMismatchError('Party {} was handed the inputs of party {}'.format(ctx.party, A.owner))
    LOG.info('party %d running %s on %dx%d', ctx.party, config, A.n, A.k)
    if config.algorithm == '3est':
        return three_estimates_mpc(A, config, ctx, iters)
    return cosine_mpc(A, config, ctx, iters)


def pack_state(outputs: SharedTruthState) -> bytes:
    """RESULT frame: the three lengths, then y, theta, delta."""
    delta = outputs.delta.values.ravel() if outputs.delta is not None else np.zeros(0, dtype=np.uint64)
    y, theta = outputs.y.values.ravel(), outputs.theta.values.ravel()
    header = np.array([y.size, theta.size, delta.size], dtype=np.uint64)
    return transport.encode_frame(transport.RESULT, np.concatenate([header, y, theta, delta]))


def unpack_state(data: bytes):
    kind, words = transport.decode_frame(bytes(data))
    if kind != transport.RESULT or words.size < 3:
        raise transport.ProtocolError('Not a result frame')
    sizes = [int(s) for s in words[:3]]
    if 3 + sum(sizes) != words.size:
        raise transport.ProtocolError('Result frame declares {} values, carries {}'.format(sum(sizes), words.size - 3))
    body = words[3:]
    return body[:sizes[0]], body[sizes[0]:sizes[0] + sizes[1]], body[sizes[0] + sizes[1]:]


def release(outputs: SharedTruthState, ctx: MpcContext, endpoint=None) -> bytes:
    """Send this server's output shares to the client. Nothing is revealed before this call.
    `endpoint` is an XML-RPC proxy to the client; without one the packed shares are returned to the caller."""
    data = pack_state(outputs)
    if endpoint is not None:
        endpoint.submit_shares(ctx.party, xmlrpc.client.Binary(data))
        LOG.info('party %d released %d bytes of output shares', ctx.party, len(data))
    return data


def reconstruct_release(data1: bytes, data2: bytes, params: rf.RingParams = rf.DEFAULT_PARAMS,
                        iteration=0) -> tp.TruthState:
    parts1, parts2 = unpack_state(data1), unpack_state(data2)
    values = []
    for a, b in zip(parts1, parts2):
        if a.size != b.size:
            raise transport.ProtocolError('Output shares differ in length: {} vs {}'.format(a.size, b.size))
        values.append(np.asarray(rf.decode(rf.ring_add(a, b, params), params), dtype=np.float64))
    y, theta, delta = values
    return tp.TruthState(y=y, theta=theta, delta=delta if delta.size else None, iteration=iteration)


def check_release(state: tp.TruthState, config: tp.AlgoConfig) -> bool:
    """Client-side check of reconstructed Cosine outputs against the public bounds the servers assumed.
    False (with a warning) means some division or square root ran outside its domain."""
    if config.algorithm != 'cosine':
        return True
    bound = cosine_y_bound(config)
    worst_y = float(np.max(np.abs(state.y)))
    worst_theta = float(np.max(np.abs(state.theta)))
    if worst_y <= bound + RELEASE_TOLERANCE and worst_theta <= 1.0 + RELEASE_TOLERANCE:
        return True
    LOG.warning('released %s outputs break their public bounds (max |y| %.4g > %g or max |theta| %.4g > 1); '
                'the trust sums of some fact nearly cancel and the results are meaningless',
                config, worst_y, bound, worst_theta)
    return False


def dry_run(algorithm, variant, n, k, iters, params: rf.RingParams = rf.DEFAULT_PARAMS, newton=None,
            truncation_mode=None) -> MpcContext:
    """Run the program of party 1 against a silent peer and a counting dealer. The program does not branch
    on secrets, so rounds, bytes and material come out exactly as in a real session."""
    config = tp.AlgoConfig.preset(algorithm, variant, max(iters, 1))
    ctx = MpcContext(1, transport.NullChannel(1, params), dealer.CountingCursor(1, params), params, newton,
                     truncation_mode or cs.TRUNCATION_MODE)
    run_program(SharedAnswerMatrix(ctx.zeros(n * k), n, k), config, ctx, iters=iters)
    return ctx


def dry_run_budget(algorithm, variant, n, k, iters, params: rf.RingParams = rf.DEFAULT_PARAMS, newton=None,
                   truncation_mode=None) -> dealer.DealerBudget:
    return dry_run(algorithm, variant, n, k, iters, params, newton, truncation_mode).cursor.consumed
