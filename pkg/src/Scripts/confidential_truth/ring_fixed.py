import numpy as np

import constants as cs

# CONVENTIONS:
# Ring elements live in numpy uint64 arrays. Every operation masks its result back to q bits.
# Values >= 2^(q-1) are negative under the signed interpretation (two's complement at bit q-1).
# A fixed-point real r is stored as round(r * 2^f), ties rounded away from zero.
# Functions accept scalars or arrays; scalar inputs give numpy scalar outputs.


class RangeError(ValueError):
    pass


# test written
class RingParams(object):
    __slots__ = ("_q", "_f")

    def __getstate__(self):
        return self.q, self.f

    def __setstate__(self, state):
        self._q, self._f = state

    def __copy__(self):
        return self.__class__(q=self.q, f=self.f)

    def __eq__(self, other):
        return isinstance(other, RingParams) and self.__getstate__() == other.__getstate__()

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(self.__getstate__())

    @property
    def q(self):
        return self._q

    @q.setter
    def q(self, val):
        val = int(val)
        if not 2 < val <= 64:
            raise ValueError('Ring width must be in (2, 64]: {}'.format(val))
        self._q = val

    @property
    def f(self):
        return self._f

    @f.setter
    def f(self, val):
        val = int(val)
        if val < 2:
            raise ValueError('Fractional bits must be >= 2: {}'.format(val))
        self._f = val

    def __init__(self, q=cs.RING_BITS, f=cs.FRAC_BITS):
        self.q = q
        self.f = f
        if self.f >= self.q:
            raise ValueError('Fractional bits {} must be below the ring width {}'.format(self.f, self.q))
        if self.q - 2 * self.f < 8:
            raise ValueError('q - 2f = {} leaves less than 8 bits of headroom for products'.format(self.q - 2 * self.f))

    def __repr__(self):
        return "(Ring:q={} f={})".format(self.q, self.f)

    @property
    def modulus(self) -> int:
        return 1 << self.q

    @property
    def mask(self) -> np.uint64:
        return np.uint64(self.modulus - 1)

    @property
    def half(self) -> int:
        return 1 << (self.q - 1)

    @property
    def scale(self) -> int:
        return 1 << self.f

    @property
    def max_real(self) -> float:
        """Exclusive bound on |r| for encode."""
        return 2.0 ** (self.q - 1 - self.f)

    @property
    def one(self) -> np.uint64:
        return np.uint64(self.scale)


DEFAULT_PARAMS = RingParams()


def _out(x):
    return x if x.ndim else x[()]


def as_ring(x, params: RingParams = DEFAULT_PARAMS) -> np.ndarray:
    """Coerce to a uint64 array reduced mod 2^q."""
    if isinstance(x, np.ndarray) and x.dtype == np.int64:
        x = x.view(np.uint64)
    return np.bitwise_and(np.asarray(x, dtype=np.uint64), params.mask)


def to_signed(x, params: RingParams = DEFAULT_PARAMS) -> np.ndarray:
    x = as_ring(x, params)
    if params.q == 64:
        return x.view(np.int64)
    s = x.astype(np.int64)
    half = np.int64(params.half)
    return np.where(s >= half, s - half - half, s)


def from_signed(v, params: RingParams = DEFAULT_PARAMS) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    return np.bitwise_and(v.view(np.uint64), params.mask)


def encode(r, params: RingParams = DEFAULT_PARAMS):
    r = np.asarray(r, dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise RangeError('Cannot encode non-finite value(s)')
    mag = np.floor(np.ldexp(np.abs(r), params.f) + 0.5)
    if np.any(mag >= float(params.half)):
        worst = float(np.max(np.abs(r)))
        raise RangeError('|{}| exceeds the representable range 2^{} of {}'.format(worst, params.q - 1 - params.f, params))
    ints = np.where(r < 0, -mag, mag).astype(np.int64)
    return _out(from_signed(ints, params))


def decode(x, params: RingParams = DEFAULT_PARAMS):
    return _out(np.ldexp(to_signed(x, params).astype(np.float64), -params.f))


def ring_add(a, b, params: RingParams = DEFAULT_PARAMS):
    with np.errstate(over='ignore'):
        return _out(np.bitwise_and(np.add(as_ring(a, params), as_ring(b, params)), params.mask))


def ring_sub(a, b, params: RingParams = DEFAULT_PARAMS):
    with np.errstate(over='ignore'):
        return _out(np.bitwise_and(np.subtract(as_ring(a, params), as_ring(b, params)), params.mask))


def ring_mul(a, b, params: RingParams = DEFAULT_PARAMS):
    with np.errstate(over='ignore'):
        return _out(np.bitwise_and(np.multiply(as_ring(a, params), as_ring(b, params)), params.mask))


def ring_neg(a, params: RingParams = DEFAULT_PARAMS):
    return ring_sub(np.uint64(0), a, params)


def local_truncate(x, params: RingParams = DEFAULT_PARAMS, bits=None):
    """Arithmetic right shift by `bits` (default f) under the signed interpretation."""
    bits = params.f if bits is None else bits
    return _out(from_signed(np.right_shift(to_signed(x, params), bits), params))


def public_int(c, params: RingParams = DEFAULT_PARAMS):
    """Ring image of a (possibly negative) public integer, unscaled."""
    return _out(from_signed(np.asarray(c, dtype=np.int64), params))


def uniform(rng: np.random.Generator, size, params: RingParams = DEFAULT_PARAMS) -> np.ndarray:
    raw = rng.integers(0, np.iinfo(np.uint64).max, size=size, dtype=np.uint64, endpoint=True)
    return np.bitwise_and(raw, params.mask)


def bit(x, i) -> np.ndarray:
    """Bit i of public ring values, as uint64 0/1."""
    return np.bitwise_and(np.right_shift(np.asarray(x, dtype=np.uint64), np.uint64(i)), np.uint64(1))
