import portion

import constants as cs
import protocols
import ring_fixed as rf
import sharing
from protocols import MpcContext, mul
from sharing import SharedVector

# public domain of max - min handed to the reciprocal in minmax_normalize
MINMAX_RANGE_DOMAIN = portion.open(2 ** -10, 2 ** 5)


def ltz(ctx: MpcContext, x: SharedVector) -> SharedVector:
    """Shares of 1 (encoded) where the secret is negative, 0 elsewhere.

    Opens c = x + r for a dealer mask r whose bits are shared, then runs the borrow chain of c - r
    bit by bit. Bit i of the borrow is majority(not c_i, r_i, b_i), which for a public c_i is either
    r_i * b_i or r_i + b_i - r_i * b_i, so each step is one product. The top bit of c - r is the sign.
    Cost: one opening plus q - 1 sequential products. Each product is a Beaver round followed by a truncation
    round in dealer truncation mode, so one call takes 1 + 2(q - 1) rounds and q - 1 triples and truncation pairs."""
    ctx.counters['ltz'] += 1
    if x.length == 0:
        return x.copy()
    q = ctx.params.q
    material = ctx.cursor.take_masks(x.length)
    r = x._new(material.r.reshape(x.shape))
    bits = [x._new(material.bits[i].reshape(x.shape)) for i in range(q)]
    c = ctx.open(x + r)
    c_bits = [rf.bit(c, i) for i in range(q)]

    borrow = bits[0].select(c_bits[0] == 0, ctx.zeros(x.shape))
    for i in range(1, q - 1):
        both = mul(ctx, bits[i], borrow)
        borrow = both.select(c_bits[i] == 1, bits[i] + borrow - both)
    top = bits[q - 1] + borrow - mul(ctx, bits[q - 1], borrow).mul_public_int(2)
    return top.select(c_bits[q - 1] == 0, (-top).add_public(ctx.params.one))


def sign(ctx: MpcContext, x: SharedVector) -> SharedVector:
    """1 - 2 * ltz(x); zero counts as positive."""
    ctx.counters['sign'] += 1
    return ltz(ctx, x).mul_public_int(-2).add_public(ctx.params.one)


def signed_inv(ctx: MpcContext, x: SharedVector, domain=None) -> SharedVector:
    """1/x for a secret of either sign: the reciprocal of |x| times the sign of x. `domain` bounds |x|."""
    s = sign(ctx, x)
    return mul(ctx, s, protocols.inv(ctx, mul(ctx, s, x), domain))


def _max_and_min(ctx: MpcContext, a: SharedVector, b: SharedVector):
    d = a - b
    a_ge_b = (-ltz(ctx, d)).add_public(ctx.params.one)
    shift = mul(ctx, d, a_ge_b)
    return b + shift, a - shift


def max_min_elem(ctx: MpcContext, v: SharedVector):
    """Tournament for the maximum and the minimum at once. Every level is one batched comparison,
    so the cost is ceil(log2 n) comparisons regardless of n."""
    v = v.ravel()
    if v.length < 1:
        raise ValueError('max/min of an empty vector')
    n = v.length
    if n == 1:
        return sharing.Share(v.owner, v.values, v.params), sharing.Share(v.owner, v.values, v.params)
    pairs = n // 2
    hi, lo = _max_and_min(ctx, v[0:2 * pairs:2], v[1:2 * pairs:2])
    if n % 2:
        hi, lo = SharedVector.concat([hi, v[n - 1:]]), SharedVector.concat([lo, v[n - 1:]])
    while hi.length > 1:
        size = hi.length
        pairs = size // 2
        a = SharedVector.concat([hi[0:2 * pairs:2], lo[0:2 * pairs:2]])
        b = SharedVector.concat([hi[1:2 * pairs:2], lo[1:2 * pairs:2]])
        larger, smaller = _max_and_min(ctx, a, b)
        next_hi, next_lo = larger[:pairs], smaller[pairs:]
        if size % 2:
            next_hi = SharedVector.concat([next_hi, hi[size - 1:]])
            next_lo = SharedVector.concat([next_lo, lo[size - 1:]])
        hi, lo = next_hi, next_lo
    return sharing.Share(hi.owner, hi.values, hi.params), sharing.Share(lo.owner, lo.values, lo.params)


def max_elem(ctx: MpcContext, v: SharedVector) -> sharing.Share:
    return max_min_elem(ctx, v)[0]


def min_elem(ctx: MpcContext, v: SharedVector) -> sharing.Share:
    return max_min_elem(ctx, v)[1]


def minmax_normalize(ctx: MpcContext, v: SharedVector, eps=cs.SQUEEZE_EPS, range_domain=MINMAX_RANGE_DOMAIN):
    """(v - min) / (max - min), squeezed into [eps, 1 - eps].
    max - min must sit inside range_domain; a degenerate (constant) vector gives meaningless output."""
    top, bottom = max_min_elem(ctx, v)
    spread_inv = protocols.inv(ctx, (top - bottom).reshape(1), range_domain)
    unit = mul(ctx, v - bottom.broadcast_to(v.shape), spread_inv.reshape(()).broadcast_to(v.shape))
    return protocols.scale(ctx, unit, 1.0 - 2.0 * eps).add_public(rf.encode(eps, ctx.params))
