import os

import numpy as np
import pytest

import constants as cs
import datasets
import truthfind_plain as tp

pytestmark = pytest.mark.skipif(not cs.HUBDUB_DIR, reason='set VMPC_HUBDUB_DIR to the Hubdub answers and truth files')


@pytest.fixture(scope='module')
def hubdub():
    return datasets.load_dataset(os.path.join(cs.HUBDUB_DIR, 'answers.csv'),
                                 os.path.join(cs.HUBDUB_DIR, 'truth.csv'))


def test_shape(hubdub):
    assert hubdub.shape == (471, 830)


def test_plain_error_counts(hubdub):
    base = tp.run(hubdub.answers, tp.AlgoConfig.preset('3est', 'base', 20), hubdub.truth)
    h = tp.run(hubdub.answers, tp.AlgoConfig.preset('3est', 'h', 20), hubdub.truth)
    assert base.errors == 269
    assert h.errors == 266
    assert int(np.sum(base.labels != h.labels)) == 5
