import logging
import secrets
import struct

import numpy as np

import constants as cs
import ring_fixed as rf

LOG = logging.getLogger(__name__)

PARTIES = (1, 2)
SHARE_HEADER = struct.Struct('<5sQQQ')  # magic, q, f, length


class PartyMismatchError(ValueError):
    pass


def check_party(party) -> int:
    if party not in PARTIES:
        raise ValueError('Party id must be 1 or 2: {}'.format(party))
    return int(party)


def make_rng(seed=None) -> np.random.Generator:
    """Philox-backed generator. A fresh 128-bit seed is drawn from the OS when none is given."""
    if seed is None:
        seed = secrets.randbits(128)
    LOG.debug('rng seed %s', seed)
    return np.random.Generator(np.random.Philox(seed))


# test written
class SharedVector(object):
    """One party's additive shares of a vector (or matrix) of secret ring values."""
    __slots__ = ("_owner", "values", "params")

    def __init__(self, owner, values, params: rf.RingParams = rf.DEFAULT_PARAMS):
        self.owner = owner
        self.params = params
        self.values = rf.as_ring(values, params)

    @property
    def owner(self):
        return self._owner

    @owner.setter
    def owner(self, val):
        self._owner = check_party(val)

    def __repr__(self):
        return "(SharedVector:P{} shape={})".format(self.owner, self.values.shape)

    def __len__(self):
        return self.values.size

    @property
    def length(self) -> int:
        return self.values.size

    @property
    def shape(self):
        return self.values.shape

    def _new(self, values):
        return SharedVector(self.owner, values, self.params)

    def _check_peer(self, other):
        if not isinstance(other, SharedVector):
            raise TypeError('Expected a SharedVector, got {}'.format(type(other)))
        if other.owner != self.owner:
            raise PartyMismatchError('Shares belong to different parties: {} and {}'.format(self.owner, other.owner))
        if other.params != self.params:
            raise PartyMismatchError('Shares use different rings: {} and {}'.format(self.params, other.params))

    def __add__(self, other):
        self._check_peer(other)
        return self._new(rf.ring_add(self.values, other.values, self.params))

    def __sub__(self, other):
        self._check_peer(other)
        return self._new(rf.ring_sub(self.values, other.values, self.params))

    def __neg__(self):
        return self._new(rf.ring_neg(self.values, self.params))

    def __getitem__(self, item):
        return self._new(self.values[item])

    def copy(self):
        return self._new(self.values.copy())

    def reshape(self, *shape):
        return self._new(self.values.reshape(*shape))

    def ravel(self):
        return self._new(self.values.ravel())

    def broadcast_to(self, shape):
        return self._new(np.broadcast_to(self.values, shape).copy())

    @property
    def T(self):
        return self._new(self.values.T)

    def sum(self, axis=None):
        with np.errstate(over='ignore'):
            return self._new(np.sum(self.values, axis=axis, dtype=np.uint64))

    def add_public(self, c):
        """Add a public ring constant. Party 1 adds it, party 2 keeps its share."""
        if self.owner == 1:
            return self._new(rf.ring_add(self.values, c, self.params))
        return self._new(np.broadcast_to(self.values, np.broadcast(self.values, np.asarray(c)).shape).copy())

    def add_public_real(self, r):
        return self.add_public(rf.encode(r, self.params))

    def mul_public_int(self, c):
        """Multiply by a public integer (no rescaling needed)."""
        return self._new(rf.ring_mul(self.values, rf.public_int(c, self.params), self.params))

    def select(self, mask, other):
        """Elementwise public choice: self where mask, other elsewhere."""
        self._check_peer(other)
        return self._new(np.where(np.asarray(mask, dtype=bool), self.values, other.values))

    @classmethod
    def zeros(cls, owner, shape, params: rf.RingParams = rf.DEFAULT_PARAMS):
        return cls(owner, np.zeros(shape, dtype=np.uint64), params)

    @classmethod
    def public(cls, owner, values, params: rf.RingParams = rf.DEFAULT_PARAMS):
        """Trivial sharing of a public ring vector: party 1 holds it, party 2 holds zeros."""
        values = rf.as_ring(values, params)
        return cls(owner, values if owner == 1 else np.zeros_like(values), params)

    @staticmethod
    def concat(parts, axis=0):
        first = parts[0]
        for p in parts[1:]:
            first._check_peer(p)
        return first._new(np.concatenate([p.values for p in parts], axis=axis))


class Share(SharedVector):
    """A single shared value."""
    __slots__ = ()

    def __init__(self, owner, value, params: rf.RingParams = rf.DEFAULT_PARAMS):
        value = np.asarray(value)
        if value.size != 1:
            raise ValueError('A Share holds exactly one ring element, got {}'.format(value.size))
        super().__init__(owner, value.reshape(()), params)

    def __repr__(self):
        return "(Share:P{} {})".format(self.owner, int(self.values))

    @property
    def value(self) -> np.uint64:
        return self.values[()]


def split(x, rng: np.random.Generator, params: rf.RingParams = rf.DEFAULT_PARAMS):
    """Split ring values into two additive shares; the first is uniform."""
    x = rf.as_ring(x, params)
    x1 = rf.uniform(rng, x.shape, params)
    x2 = rf.as_ring(rf.ring_sub(x, x1, params), params)
    if x.ndim == 0:
        return Share(1, x1, params), Share(2, x2, params)
    return SharedVector(1, x1, params), SharedVector(2, x2, params)


def reconstruct(s1: SharedVector, s2: SharedVector):
    if s1.owner == s2.owner:
        raise PartyMismatchError('Both shares belong to party {}'.format(s1.owner))
    if s1.params != s2.params:
        raise PartyMismatchError('Shares use different rings: {} and {}'.format(s1.params, s2.params))
    if s1.shape != s2.shape:
        raise PartyMismatchError('Share shapes differ: {} and {}'.format(s1.shape, s2.shape))
    return rf.ring_add(s1.values, s2.values, s1.params)


def add_local(a: SharedVector, b: SharedVector) -> SharedVector:
    return a + b


def add_public(a: SharedVector, c) -> SharedVector:
    return a.add_public(c)


def scale_public(a: SharedVector, c, fixed_point=False) -> SharedVector:
    """c * a for a public ring element c. With fixed_point, c carries the 2^f scale and the product is
    rescaled by a local truncation."""
    out = a._new(rf.ring_mul(a.values, c, a.params))
    if fixed_point:
        out = truncate_local(out)
    return out


def truncate_local(a: SharedVector, bits=None) -> SharedVector:
    """Local truncation: party 1 shifts its share, party 2 shifts the negation of its share.
    Off by at most one unit; wraps (catastrophically) with probability about |x| / 2^q."""
    bits = a.params.f if bits is None else bits
    if a.owner == 1:
        return a._new(rf.local_truncate(a.values, a.params, bits))
    neg = rf.ring_neg(a.values, a.params)
    return a._new(rf.ring_neg(rf.local_truncate(neg, a.params, bits), a.params))


def write_share_file(path, share: SharedVector):
    values = np.ascontiguousarray(share.values.ravel(), dtype='<u8')
    with open(path, 'wb') as fh:
        fh.write(SHARE_HEADER.pack(cs.SHARE_FILE_MAGIC, share.params.q, share.params.f, values.size))
        fh.write(values.tobytes())
    LOG.info('wrote %d shares for party %d to %s', values.size, share.owner, path)


def read_share_file(path, owner, params: rf.RingParams = rf.DEFAULT_PARAMS) -> SharedVector:
    with open(path, 'rb') as fh:
        header = fh.read(SHARE_HEADER.size)
        if len(header) != SHARE_HEADER.size:
            raise ValueError('Share file {} is too short for its header'.format(path))
        magic, q, f, length = SHARE_HEADER.unpack(header)
        if magic != cs.SHARE_FILE_MAGIC:
            raise ValueError('Not a share file (bad magic {!r}): {}'.format(magic, path))
        if (q, f) != (params.q, params.f):
            raise ValueError('Share file {} is for q={} f={}, session uses {}'.format(path, q, f, params))
        body = fh.read()
    if len(body) != 8 * length:
        raise ValueError('Share file {} declares {} elements but holds {} bytes'.format(path, length, len(body)))
    return SharedVector(owner, np.frombuffer(body, dtype='<u8').astype(np.uint64), params)
