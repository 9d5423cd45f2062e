import json

import pytest

import constants as cs
import ring_fixed as rf
from session_config import SessionConfig


def test_defaults():
    session = SessionConfig()
    assert (session.algorithm, session.variant, session.iters) == ('3est', 'base', cs.DEFAULT_ITERS)
    assert session.params == rf.RingParams(q=cs.RING_BITS, f=cs.FRAC_BITS)
    assert session.newton_config().inv_iters == cs.NEWTON_INV_ITERS
    config = session.algo_config()
    assert (config.normalization, config.iters, config.eps) == ('minmax', cs.DEFAULT_ITERS, cs.SQUEEZE_EPS)


def test_invalid_values_fail_at_construction():
    with pytest.raises(ValueError):
        SessionConfig(variant='fast')
    with pytest.raises(ValueError):
        SessionConfig(q=10, f=20)
    with pytest.raises(ValueError):
        SessionConfig(truncation='sloppy')
    with pytest.raises(ValueError):
        SessionConfig(dealer_files=['only_one.bin'])
    with pytest.raises(ValueError):
        SessionConfig(newton={'inv_iters': 0})


def test_digest_covers_public_fields_only():
    base = SessionConfig(n=3, k=4)
    assert base.digest() == SessionConfig(n=3, k=4).digest()
    assert base.digest() != base.replace(iters=5).digest()
    assert base.digest() != base.replace(q=64).digest()
    assert base.digest() == base.replace(host='10.0.0.2', port=9999, dealer_files=['a', 'b']).digest()
    assert 0 <= base.digest() < 2 ** 64


def test_replace_skips_unset_overrides():
    session = SessionConfig(iters=7)
    assert session.replace(iters=None, variant='h').iters == 7
    assert session.replace(iters=None, variant='h').variant == 'h'


def test_save_and_load(tmp_path):
    path = str(tmp_path / 'session.json')
    session = SessionConfig(algorithm='cosine', variant='fast', n=2, k=9, dealer_seed=3)
    session.save(path)
    assert SessionConfig.load(path) == session
    raw = json.loads((tmp_path / 'session.json').read_text())
    raw['colour'] = 'blue'
    (tmp_path / 'session.json').write_text(json.dumps(raw))
    with pytest.raises(ValueError):
        SessionConfig.load(path)
