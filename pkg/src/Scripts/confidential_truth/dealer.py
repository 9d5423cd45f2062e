import logging
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

import constants as cs
import ring_fixed as rf
import sharing

LOG = logging.getLogger(__name__)

# magic, then party, q, f, n_triples, n_truncations, n_masks
DEALER_HEADER = struct.Struct('<8s6Q')
TRIPLE_WIDTH = 4  # tag, a, b, c
TRUNC_WIDTH = 4  # tag, r, (r mod 2^(q-1)) >> f, msb(r)


def mask_width(params: rf.RingParams) -> int:
    return 2 + params.q  # tag, r, q bits


class DealerExhaustedError(RuntimeError):
    pass


class MaterialFileError(ValueError):
    pass


@dataclass
class DealerBudget:
    triples: int = 0
    truncations: int = 0
    masks: int = 0

    def __post_init__(self):
        for name in ('triples', 'truncations', 'masks'):
            if getattr(self, name) < 0:
                raise ValueError('Budget count {} is negative: {}'.format(name, getattr(self, name)))

    def __add__(self, other):
        return DealerBudget(self.triples + other.triples, self.truncations + other.truncations,
                            self.masks + other.masks)

    def covers(self, other) -> bool:
        return self.triples >= other.triples and self.truncations >= other.truncations and self.masks >= other.masks

    def random_bits(self, params: rf.RingParams = rf.DEFAULT_PARAMS) -> int:
        """Number of RandomBitShares held by the comparison masks."""
        return self.masks * params.q

    def is_empty(self) -> bool:
        return self.triples == 0 and self.truncations == 0 and self.masks == 0


class BeaverTriple(NamedTuple):
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


class MaskedPair(NamedTuple):
    r: np.ndarray
    r_high: np.ndarray  # (r mod 2^(q-1)) >> f
    r_msb: np.ndarray  # top bit of r as an unscaled ring integer


class ComparisonMask(NamedTuple):
    r: np.ndarray
    bits: np.ndarray  # shape (q, m): RandomBitShares of the bits of r, little-endian, scaled to 0 / 2^f


def _split(rng, x, params):
    x1 = rf.uniform(rng, x.shape, params)
    return x1, rf.as_ring(rf.ring_sub(x, x1, params), params)


def deal_triples(rng: np.random.Generator, m: int, params: rf.RingParams = rf.DEFAULT_PARAMS):
    a = rf.uniform(rng, m, params)
    b = rf.uniform(rng, m, params)
    c = rf.as_ring(rf.ring_mul(a, b, params), params)
    (a1, a2), (b1, b2), (c1, c2) = _split(rng, a, params), _split(rng, b, params), _split(rng, c, params)
    return BeaverTriple(a1, b1, c1), BeaverTriple(a2, b2, c2)


def deal_truncations(rng: np.random.Generator, m: int, params: rf.RingParams = rf.DEFAULT_PARAMS):
    r = rf.uniform(rng, m, params)
    low = np.bitwise_and(r, np.uint64(params.half - 1))
    r_high = np.right_shift(low, np.uint64(params.f))
    r_msb = rf.bit(r, params.q - 1)
    (r1, r2), (h1, h2), (s1, s2) = _split(rng, r, params), _split(rng, r_high, params), _split(rng, r_msb, params)
    return MaskedPair(r1, h1, s1), MaskedPair(r2, h2, s2)


def deal_masks(rng: np.random.Generator, m: int, params: rf.RingParams = rf.DEFAULT_PARAMS):
    r = rf.uniform(rng, m, params)
    bits = np.stack([rf.bit(r, i) for i in range(params.q)]) if m else np.zeros((params.q, 0), dtype=np.uint64)
    bits = np.left_shift(bits, np.uint64(params.f))
    (r1, r2), (b1, b2) = _split(rng, r, params), _split(rng, bits, params)
    return ComparisonMask(r1, b1), ComparisonMask(r2, b2)


class MaterialCursor(object):
    """Sequential reader of one party's correlated randomness. Subclasses provide the records;
    this class keeps the consumption count."""

    def __init__(self, party, params: rf.RingParams = rf.DEFAULT_PARAMS):
        self.party = sharing.check_party(party)
        self.params = params
        self.consumed = DealerBudget()

    def take_triples(self, m: int) -> BeaverTriple:
        out = self._triples(m)
        self.consumed.triples += m
        return out

    def take_truncations(self, m: int) -> MaskedPair:
        out = self._truncations(m)
        self.consumed.truncations += m
        return out

    def take_masks(self, m: int) -> ComparisonMask:
        out = self._masks(m)
        self.consumed.masks += m
        return out

    def _triples(self, m):
        raise NotImplementedError

    def _truncations(self, m):
        raise NotImplementedError

    def _masks(self, m):
        raise NotImplementedError

    def close(self):
        pass


class SeededDealer(MaterialCursor):
    """In-process dealer: both parties seed the same stream and keep their own half.
    Each party can compute the other's material, so this is for loopback runs and tests only."""

    def __init__(self, party, seed, params: rf.RingParams = rf.DEFAULT_PARAMS):
        super().__init__(party, params)
        self.seed = seed
        self._rng = sharing.make_rng(seed)

    def _pick(self, pair):
        return pair[self.party - 1]

    def _triples(self, m):
        return self._pick(deal_triples(self._rng, m, self.params))

    def _truncations(self, m):
        return self._pick(deal_truncations(self._rng, m, self.params))

    def _masks(self, m):
        return self._pick(deal_masks(self._rng, m, self.params))


class CountingCursor(MaterialCursor):
    """Hands out zero material and only counts. Used for exact budget dry runs."""

    def _triples(self, m):
        z = np.zeros(m, dtype=np.uint64)
        return BeaverTriple(z, z, z)

    def _truncations(self, m):
        z = np.zeros(m, dtype=np.uint64)
        return MaskedPair(z, z, z)

    def _masks(self, m):
        return ComparisonMask(np.zeros(m, dtype=np.uint64), np.zeros((self.params.q, m), dtype=np.uint64))


def read_header(path):
    with open(path, 'rb') as fh:
        raw = fh.read(DEALER_HEADER.size)
    if len(raw) != DEALER_HEADER.size:
        raise MaterialFileError('Dealer file {} is too short for its header'.format(path))
    magic, party, q, f, n_triples, n_truncs, n_masks = DEALER_HEADER.unpack(raw)
    if magic != cs.DEALER_FILE_MAGIC:
        raise MaterialFileError('Not a dealer file (bad magic {!r}): {}'.format(magic, path))
    return party, rf.RingParams(q=q, f=f), DealerBudget(n_triples, n_truncs, n_masks)


class FileDealerCursor(MaterialCursor):
    """Reads a dealer file through a memory map, one record block at a time."""

    def __init__(self, path, party, params: rf.RingParams = rf.DEFAULT_PARAMS):
        super().__init__(party, params)
        file_party, file_params, available = read_header(path)
        if file_party != self.party:
            raise MaterialFileError('Dealer file {} belongs to party {}, not {}'.format(path, file_party, self.party))
        if file_params != params:
            raise MaterialFileError('Dealer file {} is for {}, session uses {}'.format(path, file_params, params))
        self.path = path
        self.available = available
        self._words = np.memmap(path, dtype='<u8', mode='r', offset=DEALER_HEADER.size)
        expected = (available.triples * TRIPLE_WIDTH + available.truncations * TRUNC_WIDTH
                    + available.masks * mask_width(params))
        if self._words.size != expected:
            raise MaterialFileError('Dealer file {} holds {} words, header promises {}'.format(
                path, self._words.size, expected))
        self._sections = {
            'triples': (0, TRIPLE_WIDTH, available.triples, cs.TAG_TRIPLE),
            'truncations': (available.triples * TRIPLE_WIDTH, TRUNC_WIDTH, available.truncations, cs.TAG_TRUNC),
            'masks': (available.triples * TRIPLE_WIDTH + available.truncations * TRUNC_WIDTH,
                      mask_width(params), available.masks, cs.TAG_MASK),
        }
        self._pos = {'triples': 0, 'truncations': 0, 'masks': 0}
        LOG.info('party %d dealer file %s: %s', self.party, path, available)

    def _block(self, section, m):
        start, width, count, tag = self._sections[section]
        pos = self._pos[section]
        if pos + m > count:
            raise DealerExhaustedError('Dealer file {} ran out of {}: needed {}, {} left'.format(
                self.path, section, m, count - pos))
        lo = start + pos * width
        block = np.asarray(self._words[lo:lo + m * width], dtype=np.uint64).reshape(m, width)
        if m and not np.all(block[:, 0] == tag):
            raise MaterialFileError('Corrupt {} record in {} near record {}'.format(section, self.path, pos))
        self._pos[section] = pos + m
        return block

    def _triples(self, m):
        block = self._block('triples', m)
        return BeaverTriple(block[:, 1].copy(), block[:, 2].copy(), block[:, 3].copy())

    def _truncations(self, m):
        block = self._block('truncations', m)
        return MaskedPair(block[:, 1].copy(), block[:, 2].copy(), block[:, 3].copy())

    def _masks(self, m):
        block = self._block('masks', m)
        return ComparisonMask(block[:, 1].copy(), np.ascontiguousarray(block[:, 2:].T))

    def close(self):
        self._words = None


def _records(tag, columns):
    m = columns[0].shape[0]
    tags = np.full(m, tag, dtype=np.uint64)
    return np.column_stack([tags] + list(columns)).astype('<u8')


def generate(budget: DealerBudget, seed, paths, params: rf.RingParams = rf.DEFAULT_PARAMS):
    """Write one material file per party. Identical seeds give identical files."""
    if budget.is_empty():
        raise ValueError('Refusing to generate an empty dealer budget')
    rng = sharing.make_rng(seed)
    path1, path2 = paths
    with open(path1, 'wb') as fh1, open(path2, 'wb') as fh2:
        for party, fh in ((1, fh1), (2, fh2)):
            fh.write(DEALER_HEADER.pack(cs.DEALER_FILE_MAGIC, party, params.q, params.f,
                                        budget.triples, budget.truncations, budget.masks))
        for count, deal, tag in ((budget.triples, deal_triples, cs.TAG_TRIPLE),
                                 (budget.truncations, deal_truncations, cs.TAG_TRUNC),
                                 (budget.masks, deal_masks, cs.TAG_MASK)):
            done = 0
            while done < count:
                m = min(cs.DEALER_CHUNK, count - done)
                for fh, material in zip((fh1, fh2), deal(rng, m, params)):
                    if tag == cs.TAG_MASK:
                        columns = [material.r] + list(material.bits)
                    else:
                        columns = list(material)
                    _records(tag, columns).tofile(fh)
                done += m
    LOG.info('dealer wrote %s to %s and %s', budget, path1, path2)
    return path1, path2


def estimate_budget(algorithm, variant, n, k, iters, params: rf.RingParams = rf.DEFAULT_PARAMS, newton=None,
                    truncation_mode=None) -> DealerBudget:
    """Exact material count for one session.

    The secure algorithms are data-oblivious, so party 1's program is replayed over a null channel and a
    counting cursor. Per protocol on m elements: mul takes m triples (plus m truncation pairs in dealer
    truncation mode); inv takes 2m(iters - 1) products; sqrt_inv 3m(iters - 1); ltz one mask and (q - 1)m
    products. The 3-Estimates precompute is one squaring per answer, n*k products."""
    if n < 1 or k < 1:
        raise ValueError('Sizes must be positive: n={} k={}'.format(n, k))
    import truthfind_mpc
    return truthfind_mpc.dry_run_budget(algorithm, variant, n, k, iters, params=params, newton=newton,
                                        truncation_mode=truncation_mode)
