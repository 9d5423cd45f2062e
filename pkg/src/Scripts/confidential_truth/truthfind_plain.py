import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

import constants as cs

LOG = logging.getLogger(__name__)

ALGORITHMS = ('3est', 'cosine')
NORMALIZATIONS = ('minmax', 'linear_h')
POWERS = ('cubic', 'linear')
INVERSIONS = ('signed', 'square_trick')

# variant name -> (normalization, power, inversion)
VARIANTS = {
    '3est': {'base': ('minmax', 'cubic', 'signed'),
             'h': ('linear_h', 'cubic', 'signed')},
    'cosine': {'base': ('minmax', 'cubic', 'signed'),
               'fast': ('minmax', 'linear', 'square_trick')},
}
VARIANT_ALIASES = {'minmax': 'base', 'compare': 'base', 'linear_h': 'h', 'cubic': 'base', 'linear': 'fast'}


class AnswerMatrixError(ValueError):
    pass


def answer_matrix(values) -> np.ndarray:
    """Validated n x k matrix of answers in {-1, 0, 1}; every fact and every source answers at least once."""
    A = np.asarray(values)
    if A.ndim != 2 or A.size == 0:
        raise AnswerMatrixError('Answer matrix must be a non-empty 2-d array, got shape {}'.format(A.shape))
    if not np.all(np.isin(A, (-1, 0, 1))):
        bad = A[~np.isin(A, (-1, 0, 1))]
        raise AnswerMatrixError('Answers must be -1, 0 or 1; found {}'.format(bad[0]))
    A = A.astype(np.int64)
    empty_facts = np.flatnonzero(~np.any(A != 0, axis=0))
    if empty_facts.size:
        raise AnswerMatrixError('Facts without any answer: {}'.format(empty_facts.tolist()[:10]))
    empty_sources = np.flatnonzero(~np.any(A != 0, axis=1))
    if empty_sources.size:
        raise AnswerMatrixError('Sources without any answer: {}'.format(empty_sources.tolist()[:10]))
    return A


# test written
class AlgoConfig(object):
    __slots__ = ("_algorithm", "_normalization", "_power", "_inversion", "_iters", "_eta", "_eps", "theta0",
                 "delta0", "variant")

    def __getstate__(self):
        return (self.algorithm, self.normalization, self.power, self.inversion, self.iters, self.eta, self.eps,
                self.theta0, self.delta0, self.variant)

    def __eq__(self, other):
        return isinstance(other, AlgoConfig) and self.__getstate__() == other.__getstate__()

    @property
    def algorithm(self):
        return self._algorithm

    @algorithm.setter
    def algorithm(self, val):
        if val not in ALGORITHMS:
            raise ValueError('Unknown algorithm: {} (expected one of {})'.format(val, ALGORITHMS))
        self._algorithm = val

    @property
    def normalization(self):
        return self._normalization

    @normalization.setter
    def normalization(self, val):
        if val not in NORMALIZATIONS:
            raise ValueError('Unknown normalization: {}'.format(val))
        self._normalization = val

    @property
    def power(self):
        return self._power

    @power.setter
    def power(self, val):
        if val not in POWERS:
            raise ValueError('Unknown cosine power: {}'.format(val))
        self._power = val

    @property
    def inversion(self):
        return self._inversion

    @inversion.setter
    def inversion(self, val):
        if val not in INVERSIONS:
            raise ValueError('Unknown inversion: {}'.format(val))
        self._inversion = val

    @property
    def iters(self):
        return self._iters

    @iters.setter
    def iters(self, val):
        if int(val) < 1:
            raise ValueError('Iteration count T must be >= 1: {}'.format(val))
        self._iters = int(val)

    @property
    def eta(self):
        return self._eta

    @eta.setter
    def eta(self, val):
        if not 0 < val < 1:
            raise ValueError('Cosine smoothing eta must be in (0, 1): {}'.format(val))
        self._eta = float(val)

    @property
    def eps(self):
        return self._eps

    @eps.setter
    def eps(self, val):
        if not 0 <= val < 0.5:
            raise ValueError('Squeeze eps must be in [0, 0.5): {}'.format(val))
        self._eps = float(val)

    def __init__(self, algorithm='3est', normalization='minmax', power='cubic', inversion='signed',
                 iters=cs.DEFAULT_ITERS, eta=cs.COSINE_ETA, eps=cs.SQUEEZE_EPS, theta0=cs.THETA_INIT,
                 delta0=cs.DELTA_INIT, variant=None):
        self.algorithm = algorithm
        self.normalization = normalization
        self.power = power
        self.inversion = inversion
        self.iters = iters
        self.eta = eta
        self.eps = eps
        self.theta0 = float(theta0)
        self.delta0 = float(delta0)
        self.variant = variant

    def __repr__(self):
        if self.algorithm == '3est':
            return "(3est:{} T={})".format(self.normalization, self.iters)
        return "(cosine:{}/{} T={} eta={})".format(self.power, self.inversion, self.iters, self.eta)

    @classmethod
    def preset(cls, algorithm, variant='base', iters=cs.DEFAULT_ITERS, **kwargs):
        if algorithm not in VARIANTS:
            raise ValueError('Unknown algorithm: {} (expected one of {})'.format(algorithm, ALGORITHMS))
        name = VARIANT_ALIASES.get(variant, variant)
        if name not in VARIANTS[algorithm]:
            raise ValueError('Unknown variant {} for {} (expected one of {})'.format(
                variant, algorithm, sorted(VARIANTS[algorithm])))
        normalization, power, inversion = VARIANTS[algorithm][name]
        return cls(algorithm=algorithm, normalization=normalization, power=power, inversion=inversion,
                   iters=iters, variant=name, **kwargs)

    def to_dict(self):
        return {'algorithm': self.algorithm, 'variant': self.variant, 'normalization': self.normalization,
                'power': self.power, 'inversion': self.inversion, 'iters': self.iters, 'eta': self.eta,
                'eps': self.eps, 'theta0': self.theta0, 'delta0': self.delta0}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class TruthState:
    y: np.ndarray
    theta: np.ndarray
    delta: Optional[np.ndarray] = None
    iteration: int = 0


@dataclass
class TruthReport:
    algorithm: str
    variant: Optional[str]
    state: TruthState
    labels: np.ndarray
    errors: Optional[int] = None
    stats: Optional[object] = None
    iteration_rounds: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    domain_slack: Optional[float] = None


def majority_vote(A) -> np.ndarray:
    """Sign of each column sum; ties go to +1."""
    return np.where(np.asarray(A).sum(axis=0) >= 0, 1, -1)


def squeeze_minmax(x, eps=cs.SQUEEZE_EPS) -> np.ndarray:
    lo, hi = np.min(x), np.max(x)
    if hi == lo:
        LOG.warning('min-max normalization of a constant vector; mapping everything to 0.5')
        return np.full_like(x, 0.5, dtype=np.float64)
    return eps + (1.0 - 2.0 * eps) * (x - lo) / (hi - lo)


def normalize_h(x) -> np.ndarray:
    return cs.H_SLOPE * np.asarray(x, dtype=np.float64) + cs.H_OFFSET


def normalize(x, config: AlgoConfig) -> np.ndarray:
    if config.normalization == 'linear_h':
        return normalize_h(x)
    return squeeze_minmax(x, config.eps)


def _indicators(A):
    return (A == 1).astype(np.float64), (A == -1).astype(np.float64)


def truth_update(A, theta, delta) -> np.ndarray:
    """3-Estimates truth values before normalization."""
    sigma, tau = _indicators(A)
    td = np.outer(theta, delta)
    pos_views = np.sum(sigma * (1.0 - td), axis=0)
    neg_views = np.sum(tau * td, axis=0)
    nb_views = np.sum(sigma + tau, axis=0)
    return (pos_views + neg_views) / nb_views


def difficulty_update(A, y, theta) -> np.ndarray:
    assert np.all(theta > 0), 'untrustworthiness must stay positive'
    sigma, tau = _indicators(A)
    pos_views = np.sum(sigma * (1.0 - y)[None, :] / theta[:, None], axis=0)
    neg_views = np.sum(tau * y[None, :] / theta[:, None], axis=0)
    nb_views = np.sum(sigma + tau, axis=0)
    return (pos_views + neg_views) / nb_views


def untrust_update(A, y, delta) -> np.ndarray:
    assert np.all(delta > 0), 'difficulty must stay positive'
    sigma, tau = _indicators(A)
    pos_facts = np.sum(sigma * ((1.0 - y) / delta)[None, :], axis=1)
    neg_facts = np.sum(tau * (y / delta)[None, :], axis=1)
    nb_facts = np.sum(sigma + tau, axis=1)
    return (pos_facts + neg_facts) / nb_facts


def three_estimates_init(A, config: AlgoConfig) -> TruthState:
    n, k = A.shape
    return TruthState(y=np.zeros(k), theta=np.full(n, config.theta0), delta=np.full(k, config.delta0))


def three_estimates_step(A, state: TruthState, config: AlgoConfig) -> TruthState:
    """One iteration in order: truth, normalize; difficulty, normalize; untrustworthiness, normalize."""
    y = normalize(truth_update(A, state.theta, state.delta), config)
    delta = normalize(difficulty_update(A, y, state.theta), config)
    theta = normalize(untrust_update(A, y, delta), config)
    return TruthState(y=y, theta=theta, delta=delta, iteration=state.iteration + 1)


def cosine_similarity(A, y) -> np.ndarray:
    """Cosine between each source's answers and y over the facts it answered:
    (sum v y / |F|) / sqrt(sum y^2 / |F|)."""
    answered = (A != 0).astype(np.float64)
    nb_facts = answered.sum(axis=1)
    mean_vy = (A * y[None, :]).sum(axis=1) / nb_facts
    mean_sq = (answered * (y * y)[None, :]).sum(axis=1) / nb_facts
    assert np.all(mean_sq > 0), 'truth vector vanished on the facts of some source'
    return mean_vy / np.sqrt(mean_sq)


def cosine_init(A, config: AlgoConfig) -> TruthState:
    """y0 = mean answer over the answering sources; theta0 = cosine of each source against y0."""
    answered = (A != 0).astype(np.float64)
    y = A.sum(axis=0) / answered.sum(axis=0)
    return TruthState(y=y, theta=cosine_similarity(A, y), delta=None, iteration=0)


def cosine_truth(A, theta, config: AlgoConfig) -> np.ndarray:
    answered = (A != 0).astype(np.float64)
    p = 3 if config.power == 'cubic' else 1
    weights = theta ** p
    num = (A * weights[:, None]).sum(axis=0)
    if config.inversion == 'signed':
        den = (answered * np.abs(weights)[:, None]).sum(axis=0)
        assert np.all(den != 0), 'all answering sources have zero trust'
        return num / den
    # square trick: no sign is available, so the denominator keeps the signed powers
    den = (answered * weights[:, None]).sum(axis=0)
    assert np.all(den != 0), 'signed trust sum vanished'
    return num * den / (den * den)


def fast_cosine_slack(A, theta, y_bound=cs.COSINE_FAST_Y_BOUND, den_lower=cs.COSINE_DEN_LOWER) -> float:
    """min over facts of |D| - max(den_lower, S / y_bound), where D and S are the signed and absolute trust sums
    of the answering sources. Negative when the next fast Cosine truth update leaves its public domain."""
    answered = (A != 0).astype(np.float64)
    signed = np.abs(answered.T @ theta)
    mass = answered.T @ np.abs(theta)
    return float(np.min(signed - np.maximum(den_lower, mass / y_bound)))


def cosine_step(A, state: TruthState, config: AlgoConfig) -> TruthState:
    y = cosine_truth(A, state.theta, config)
    theta = (1.0 - config.eta) * state.theta + config.eta * cosine_similarity(A, y)
    return TruthState(y=y, theta=theta, delta=None, iteration=state.iteration + 1)


def labels_of(state: TruthState, algorithm) -> np.ndarray:
    """3-Estimates: y >= 0.5 is true. Cosine: y >= 0 is true."""
    threshold = 0.5 if algorithm == '3est' else 0.0
    return np.where(state.y >= threshold, 1, -1)


def count_errors(labels, truth) -> Optional[int]:
    if truth is None:
        return None
    truth = np.asarray(truth)
    if truth.shape != labels.shape:
        raise ValueError('Ground truth has {} labels for {} facts'.format(truth.size, labels.size))
    return int(np.sum(labels != truth))


def run(A, config: AlgoConfig, truth=None) -> TruthReport:
    A = answer_matrix(A)
    if config.algorithm == '3est':
        state = three_estimates_init(A, config)
        step = three_estimates_step
    else:
        state = cosine_init(A, config)
        step = cosine_step
    track = config.algorithm == 'cosine' and config.inversion == 'square_trick'
    slack = None
    for _ in range(config.iters):
        if track:
            now = fast_cosine_slack(A, state.theta)
            slack = now if slack is None else min(slack, now)
        state = step(A, state, config)
    if slack is not None and slack < 0:
        LOG.warning('trust sums nearly cancel on some fact (slack %.3g); the fast Cosine variant cannot be run '
                    'over shares on this data', slack)
    labels = labels_of(state, config.algorithm)
    LOG.info('plain %s on %dx%d done', config, A.shape[0], A.shape[1])
    return TruthReport(algorithm=config.algorithm, variant=config.variant, state=state, labels=labels,
                       errors=count_errors(labels, truth), domain_slack=slack)
