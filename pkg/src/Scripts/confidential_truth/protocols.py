import collections
import logging
import math
from typing import NamedTuple

import numpy as np
import portion

import constants as cs
import dealer
import ring_fixed as rf
import sharing
from sharing import SharedVector

LOG = logging.getLogger(__name__)

TRUNCATION_MODES = ('dealer', 'local')


# test written
class NewtonConfig(object):
    __slots__ = ("_inv_iters", "_sqrt_iters", "_inv_bound", "_sqrt_bound", "_lower")

    def __getstate__(self):
        return self.inv_iters, self.sqrt_iters, self.inv_bound, self.sqrt_bound, self.lower

    def __setstate__(self, state):
        self._inv_iters, self._sqrt_iters, self._inv_bound, self._sqrt_bound, self._lower = state

    def __eq__(self, other):
        return isinstance(other, NewtonConfig) and self.__getstate__() == other.__getstate__()

    def __hash__(self):
        return hash(self.__getstate__())

    @property
    def inv_iters(self):
        return self._inv_iters

    @inv_iters.setter
    def inv_iters(self, val):
        if int(val) < 1:
            raise ValueError('Newton iteration count < 1: {}'.format(val))
        self._inv_iters = int(val)

    @property
    def sqrt_iters(self):
        return self._sqrt_iters

    @sqrt_iters.setter
    def sqrt_iters(self, val):
        if int(val) < 1:
            raise ValueError('Newton iteration count < 1: {}'.format(val))
        self._sqrt_iters = int(val)

    @property
    def inv_bound(self):
        return self._inv_bound

    @inv_bound.setter
    def inv_bound(self, val):
        if not 0 < val < 2 ** 30:
            raise ValueError('Newton domain bound out of range: {}'.format(val))
        self._inv_bound = float(val)

    @property
    def sqrt_bound(self):
        return self._sqrt_bound

    @sqrt_bound.setter
    def sqrt_bound(self, val):
        if not 0 < val < 2 ** 30:
            raise ValueError('Newton domain bound out of range: {}'.format(val))
        self._sqrt_bound = float(val)

    @property
    def lower(self):
        return self._lower

    @lower.setter
    def lower(self, val):
        if not val > 0:
            raise ValueError('Newton domain lower end must be positive: {}'.format(val))
        self._lower = float(val)

    def __init__(self, inv_iters=cs.NEWTON_INV_ITERS, sqrt_iters=cs.NEWTON_SQRT_ITERS,
                 inv_bound=cs.NEWTON_INV_BOUND, sqrt_bound=cs.NEWTON_SQRT_BOUND, lower=cs.NEWTON_LOWER):
        self.inv_iters = inv_iters
        self.sqrt_iters = sqrt_iters
        self.inv_bound = inv_bound
        self.sqrt_bound = sqrt_bound
        self.lower = lower
        if self.lower >= min(self.inv_bound, self.sqrt_bound):
            raise ValueError('Newton domain is empty: lower {} vs bounds {} / {}'.format(
                self.lower, self.inv_bound, self.sqrt_bound))

    def __repr__(self):
        return "(Newton:inv {}x<{} sqrt {}x<{} lo={})".format(self.inv_iters, self.inv_bound, self.sqrt_iters,
                                                            self.sqrt_bound, self.lower)

    @property
    def inv_domain(self):
        return portion.open(self.lower, self.inv_bound)

    @property
    def sqrt_domain(self):
        return portion.open(self.lower, self.sqrt_bound)

    def to_dict(self):
        return {'inv_iters': self.inv_iters, 'sqrt_iters': self.sqrt_iters, 'inv_bound': self.inv_bound,
                'sqrt_bound': self.sqrt_bound, 'lower': self.lower}


def _domain_ends(domain):
    if not isinstance(domain, portion.Interval) or not domain.atomic or domain.empty:
        raise ValueError('Newton domain must be a single non-empty interval: {}'.format(domain))
    lo, hi = float(domain.lower), float(domain.upper)
    if not (0 < lo < hi < math.inf):
        raise ValueError('Newton domain must lie strictly inside (0, inf): {}'.format(domain))
    return lo, hi


def inv_start_exponent(domain) -> int:
    """w0 = 2^-e with e = ceil(log2 hi), so 0 < x * w0 <= 1 on the whole domain."""
    return math.ceil(math.log2(_domain_ends(domain)[1]))


def sqrt_start_exponent(domain) -> int:
    """y0 = 2^-e with e = ceil(log2(hi) / 2), so 0 < x * y0^2 <= 1 on the whole domain."""
    return math.ceil(math.log2(_domain_ends(domain)[1]) / 2)


def newton_inv_iterations(domain, target=cs.NEWTON_TARGET_RESIDUAL) -> int:
    lo, _ = _domain_ends(domain)
    err = 1.0 - lo * 2.0 ** -inv_start_exponent(domain)
    n = 0
    while err > target:
        err *= err
        n += 1
    return max(n, 1) + 1


def newton_sqrt_iterations(domain, target=cs.NEWTON_TARGET_RESIDUAL) -> int:
    lo, _ = _domain_ends(domain)
    u = lo * 2.0 ** (-2 * sqrt_start_exponent(domain))
    n = 0
    while abs(1.0 - u) > target and n < 200:
        u = u * (3.0 - u) ** 2 / 4.0
        n += 1
    return max(n, 1) + 1


class MpcContext(object):
    """Everything one server needs to run the online phase: its party id, the channel to its peer, its
    dealer material, and the public ring and Newton settings (agreed on in the handshake)."""
    __slots__ = ("party", "channel", "cursor", "params", "newton", "truncation", "counters", "iteration_rounds")

    def __init__(self, party, channel, cursor: dealer.MaterialCursor, params: rf.RingParams = rf.DEFAULT_PARAMS,
                 newton: NewtonConfig = None, truncation=cs.TRUNCATION_MODE):
        self.party = sharing.check_party(party)
        if truncation not in TRUNCATION_MODES:
            raise ValueError('Unknown truncation mode: {}'.format(truncation))
        if cursor.party != self.party or channel.party != self.party:
            raise sharing.PartyMismatchError('Context for party {} got channel/cursor of another party'.format(party))
        self.channel = channel
        self.cursor = cursor
        self.params = params
        self.newton = NewtonConfig() if newton is None else newton
        self.truncation = truncation
        self.counters = collections.Counter()
        self.iteration_rounds = []

    def share(self, values) -> SharedVector:
        return SharedVector(self.party, values, self.params)

    def public(self, reals) -> SharedVector:
        return SharedVector.public(self.party, rf.encode(reals, self.params), self.params)

    def zeros(self, shape) -> SharedVector:
        return SharedVector.zeros(self.party, shape, self.params)

    def open(self, x: SharedVector) -> np.ndarray:
        return self.channel.open(x)

    def open_real(self, x: SharedVector):
        return rf.decode(self.open(x), self.params)

    @property
    def rounds(self) -> int:
        return self.channel.stats.rounds

    def log_iteration(self, start_rounds):
        self.iteration_rounds.append(self.rounds - start_rounds)


def _as_shape(x: SharedVector, values):
    return x._new(np.asarray(values).reshape(x.shape))


def mul(ctx: MpcContext, x: SharedVector, y: SharedVector, truncate=True) -> SharedVector:
    """Beaver product. One round for the masked openings d = x - a, e = y - b (batched), plus the
    truncation step when the operands are fixed-point."""
    if x.shape != y.shape:
        raise ValueError('mul operands differ in shape: {} vs {}'.format(x.shape, y.shape))
    m = x.length
    if m == 0:
        return x.copy()
    ctx.counters['mul'] += 1
    t = ctx.cursor.take_triples(m)
    a, b, c = _as_shape(x, t.a), _as_shape(x, t.b), _as_shape(x, t.c)
    opened = ctx.open(SharedVector.concat([(x - a).ravel(), (y - b).ravel()]))
    d, e = opened[:m].reshape(x.shape), opened[m:].reshape(x.shape)
    p = ctx.params
    z = rf.ring_add(c.values, rf.ring_add(rf.ring_mul(e, a.values, p), rf.ring_mul(d, b.values, p), p), p)
    if ctx.party == 1:
        z = rf.ring_add(z, rf.ring_mul(d, e, p), p)
    out = x._new(z)
    return truncate_product(ctx, out) if truncate else out


def truncate_product(ctx: MpcContext, x: SharedVector) -> SharedVector:
    """Rescale a doubled-scale product by 2^f using the context's truncation mode."""
    ctx.counters['truncate'] += 1
    if ctx.truncation == 'local':
        return sharing.truncate_local(x)
    return _truncate_with_mask(ctx, x)


def _truncate_with_mask(ctx: MpcContext, x: SharedVector) -> SharedVector:
    # Requires |x| < 2^(q-2). Result is floor(x / 2^f) or one more; exact when 2^f divides x.
    p = ctx.params
    q, f = p.q, p.f
    if x.length == 0:
        return x.copy()
    pair = ctx.cursor.take_truncations(x.length)
    r, r_high, r_msb = _as_shape(x, pair.r), _as_shape(x, pair.r_high), _as_shape(x, pair.r_msb)
    shifted = x.add_public(np.uint64(1 << (q - 2)))
    c = ctx.open(shifted + r)
    c_msb = rf.bit(c, q - 1)
    c_high = np.right_shift(np.bitwise_and(c, np.uint64(p.half - 1)), np.uint64(f))
    # carry out of the low q-1 bits: w = msb(c) xor msb(r)
    w = r_msb.select(c_msb == 0, (-r_msb).add_public(np.uint64(1)))
    out = w.mul_public_int(1 << (q - 1 - f)) - r_high
    return out.add_public(rf.ring_sub(c_high, np.uint64(1 << (q - 2 - f)), p))


def _shift_pow2(x: SharedVector, exponent: int) -> SharedVector:
    """x * 2^exponent on shares; right shifts are local truncations."""
    if exponent >= 0:
        return x.mul_public_int(1 << exponent)
    return sharing.truncate_local(x, -exponent)


def scale(ctx: MpcContext, x: SharedVector, c) -> SharedVector:
    """Multiply by public real constant(s) c (scalar or broadcastable array)."""
    c = np.asarray(c, dtype=np.float64)
    for s in range(cs.LOCAL_SHIFT_MAX_BITS + 1):
        scaled = np.ldexp(c, s)
        if np.all(scaled == np.round(scaled)):
            out = x.mul_public_int(scaled.astype(np.int64))
            return sharing.truncate_local(out, s) if s else out
    out = x._new(rf.ring_mul(x.values, rf.encode(c, ctx.params), ctx.params))
    return truncate_product(ctx, out)


def inv(ctx: MpcContext, x: SharedVector, domain=None) -> SharedVector:
    """Newton reciprocal w <- w(2 - xw) from the public start w0 = 2^-ceil(log2 hi).

    Secrets must lie in the public domain (default (lower, inv_bound) of the context). Outside it the
    result silently degrades. The first step uses the public start point and costs no communication,
    so a call costs 2(iters - 1) products."""
    ctx.counters['inv'] += 1
    if domain is None:
        domain, iters = ctx.newton.inv_domain, ctx.newton.inv_iters
    else:
        iters = newton_inv_iterations(domain)
    e = inv_start_exponent(domain)
    w = (-_shift_pow2(x, -2 * e)).add_public(rf.encode(2.0 ** (1 - e), ctx.params))
    two = rf.encode(2.0, ctx.params)
    for _ in range(iters - 1):
        t = mul(ctx, x, w)
        w = mul(ctx, w, (-t).add_public(two))
    return w


def sqrt_inv(ctx: MpcContext, x: SharedVector, domain=None) -> SharedVector:
    """Newton inverse square root y <- y(3 - xy^2)/2 from y0 = 2^-ceil(log2(hi)/2).
    Free first step, then three products per iteration."""
    ctx.counters['sqrt_inv'] += 1
    if domain is None:
        domain, iters = ctx.newton.sqrt_domain, ctx.newton.sqrt_iters
    else:
        iters = newton_sqrt_iterations(domain)
    e = sqrt_start_exponent(domain)
    y = (-_shift_pow2(x, -(3 * e + 1))).add_public(rf.encode(1.5 * 2.0 ** -e, ctx.params))
    three = rf.encode(3.0, ctx.params)
    for _ in range(iters - 1):
        u = mul(ctx, x, mul(ctx, y, y))
        y = mul(ctx, y, scale(ctx, (-u).add_public(three), 0.5))
    return y


def sqrt(ctx: MpcContext, x: SharedVector, domain=None) -> SharedVector:
    return mul(ctx, x, sqrt_inv(ctx, x, domain))


def inv_square_trick(ctx: MpcContext, x: SharedVector, domain_sq) -> SharedVector:
    """1/x for a secret of either sign, as x * inv(x^2). `domain_sq` bounds x^2."""
    return mul(ctx, x, inv(ctx, mul(ctx, x, x), domain_sq))


class IndicatorMatrices(NamedTuple):
    sigma: SharedVector  # answer == 1
    tau: SharedVector  # answer == -1
    z_sq: SharedVector  # answer != 0


def eq_poly(ctx: MpcContext, z: SharedVector, kappa, z_sq: SharedVector = None) -> SharedVector:
    """Indicator of z == kappa for secrets z in {-1, 0, 1}, as a degree-2 polynomial.
    kappa = 1: (z^2 + z)/2, kappa = -1: (z^2 - z)/2, kappa = 0: 1 - z^2.
    Only the squaring communicates; pass z_sq to share it between several kappas."""
    if kappa not in (-1, 0, 1):
        raise ValueError('kappa must be -1, 0 or 1: {}'.format(kappa))
    if z_sq is None:
        z_sq = mul(ctx, z, z)
    if kappa == 0:
        return (-z_sq).add_public(ctx.params.one)
    num = z_sq + z if kappa == 1 else z_sq - z
    # num is 0 or 2 * 2^f, so halving is exact
    return sharing.truncate_local(num, 1)


def indicators(ctx: MpcContext, z: SharedVector) -> IndicatorMatrices:
    z_sq = mul(ctx, z, z)
    return IndicatorMatrices(eq_poly(ctx, z, 1, z_sq), eq_poly(ctx, z, -1, z_sq), z_sq)


def conditioned_sum(ctx: MpcContext, t: SharedVector, z: SharedVector, kappa, indicator: SharedVector = None,
                    axis=None) -> SharedVector:
    """Sum of t_i over the entries with z_i == kappa. Returns a Share when summing everything."""
    if t.shape != z.shape:
        raise ValueError('conditioned_sum length mismatch: {} vs {}'.format(t.shape, z.shape))
    if indicator is None:
        indicator = eq_poly(ctx, z, kappa)
    total = mul(ctx, t, indicator).sum(axis)
    if axis is None:
        return sharing.Share(total.owner, total.values, total.params)
    return total
