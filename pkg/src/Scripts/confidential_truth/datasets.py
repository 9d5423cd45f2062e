import csv
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

import truthfind_plain as tp

LOG = logging.getLogger(__name__)

ANSWER_HEADER = ('source_id', 'fact_id', 'answer')
TRUTH_HEADER = ('fact_id', 'label')
ANSWER_VALUES = ('-1', '0', '1')
DENSE_SPLIT = re.compile(r'[,\s]+')
SYNTH_MAX_RESAMPLES = 1000


class DatasetError(ValueError):
    def __init__(self, msg, path=None, line=None):
        self.path = path
        self.line = line
        where = ''
        if path is not None:
            where = '{}:{}: '.format(path, line) if line is not None else '{}: '.format(path)
        super().__init__(where + msg)


@dataclass
class Dataset:
    answers: np.ndarray
    source_ids: list
    fact_ids: list
    truth: Optional[np.ndarray] = None
    name: str = ''

    @property
    def shape(self):
        return self.answers.shape


def _first_row(path):
    with open(path, newline='') as fh:
        for line in fh:
            if line.strip():
                return line.strip()
    raise DatasetError('file is empty', path)


def _is_header(row, header):
    return tuple(cell.strip().lower() for cell in row.split(',')) == header


def _parse_answer(raw, path, line):
    raw = raw.strip()
    if raw not in ANSWER_VALUES:
        raise DatasetError('answer must be -1, 0 or 1, got {!r}'.format(raw), path, line)
    return int(raw)


def _load_long(path):
    sources, facts, entries = {}, {}, {}
    with open(path, newline='') as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            line = reader.line_num
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise DatasetError('expected 3 fields, got {}'.format(len(row)), path, line)
            source, fact = row[0].strip(), row[1].strip()
            answer = _parse_answer(row[2], path, line)
            i = sources.setdefault(source, len(sources))
            j = facts.setdefault(fact, len(facts))
            if (i, j) in entries:
                raise DatasetError('duplicate answer of source {} on fact {}'.format(source, fact), path, line)
            entries[(i, j)] = answer
    if not entries:
        raise DatasetError('no answers', path)
    A = np.zeros((len(sources), len(facts)), dtype=np.int64)
    for (i, j), answer in entries.items():
        A[i, j] = answer
    return A, list(sources), list(facts)


def _load_dense(path):
    """One row per source, one column per fact. Separators may be commas or whitespace."""
    rows = []
    with open(path) as fh:
        for line, text in enumerate(fh, start=1):
            text = text.strip()
            if not text or text.startswith('#'):
                continue
            rows.append([_parse_answer(cell, path, line) for cell in DENSE_SPLIT.split(text)])
            if len(rows[-1]) != len(rows[0]):
                raise DatasetError('row has {} answers, first row has {}'.format(len(rows[-1]), len(rows[0])),
                                   path, line)
    if not rows:
        raise DatasetError('no answers', path)
    A = np.array(rows, dtype=np.int64)
    return A, [str(i) for i in range(A.shape[0])], [str(j) for j in range(A.shape[1])]


def _parse_label(raw, path, line, dense):
    raw = raw.strip()
    if raw in ('-1', '1'):
        return int(raw)
    # the matrix-style truth files use 0 for false
    if dense and raw == '0':
        return -1
    raise DatasetError('label must be -1 or 1, got {!r}'.format(raw), path, line)


def load_truth(path, fact_ids) -> np.ndarray:
    """Ground truth aligned to `fact_ids`. Long format: "fact_id,label". Dense format: one label per line."""
    if _is_header(_first_row(path), TRUTH_HEADER):
        labels = {}
        with open(path, newline='') as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                if not row or not any(cell.strip() for cell in row):
                    continue
                if len(row) != 2:
                    raise DatasetError('expected 2 fields, got {}'.format(len(row)), path, reader.line_num)
                fact = row[0].strip()
                if fact in labels:
                    raise DatasetError('duplicate label for fact {}'.format(fact), path, reader.line_num)
                labels[fact] = _parse_label(row[1], path, reader.line_num, dense=False)
        missing = [fact for fact in fact_ids if fact not in labels]
        if missing:
            raise DatasetError('no label for facts {}'.format(missing[:10]), path)
        return np.array([labels[fact] for fact in fact_ids], dtype=np.int64)

    labels = []
    with open(path) as fh:
        for line, text in enumerate(fh, start=1):
            text = text.strip()
            if text and not text.startswith('#'):
                labels.append(_parse_label(text, path, line, dense=True))
    if len(labels) != len(fact_ids):
        raise DatasetError('{} labels for {} facts'.format(len(labels), len(fact_ids)), path)
    return np.array(labels, dtype=np.int64)


def load_dataset(path, ground_truth=None) -> Dataset:
    """Answer CSV ("source_id,fact_id,answer") or a dense matrix file, sniffed from the first line.
    Ids are numbered in order of first appearance."""
    if not os.path.isfile(path):
        raise DatasetError('no such file', path)
    if _is_header(_first_row(path), ANSWER_HEADER):
        A, sources, facts = _load_long(path)
    else:
        LOG.info('%s has no answer header, reading it as a dense matrix', path)
        A, sources, facts = _load_dense(path)
    try:
        A = tp.answer_matrix(A)
    except tp.AnswerMatrixError as e:
        raise DatasetError(str(e), path) from e
    truth = load_truth(ground_truth, facts) if ground_truth else None
    LOG.info('loaded %s: %d sources, %d facts, %d answers', path, A.shape[0], A.shape[1], np.count_nonzero(A))
    return Dataset(answers=A, source_ids=sources, fact_ids=facts, truth=truth,
                   name=os.path.splitext(os.path.basename(path))[0])


def save_dataset(path, dataset: Dataset):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(ANSWER_HEADER)
        for i, j in zip(*np.nonzero(dataset.answers)):
            writer.writerow([dataset.source_ids[i], dataset.fact_ids[j], int(dataset.answers[i, j])])


def save_truth(path, dataset: Dataset):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(TRUTH_HEADER)
        for fact, label in zip(dataset.fact_ids, dataset.truth):
            writer.writerow([fact, int(label)])


@dataclass
class SynthSpec:
    seed: int
    n: int
    k: int
    correctness: object = 0.7  # one probability for all sources, or one per source
    abstain: float = 0.0
    truth: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError('Sizes must be positive: n={} k={}'.format(self.n, self.k))
        p = np.broadcast_to(np.asarray(self.correctness, dtype=np.float64), (self.n,))
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError('Correctness probabilities must lie in [0, 1]')
        if not 0 <= self.abstain < 1:
            raise ValueError('Abstain probability must lie in [0, 1), got {}'.format(self.abstain))
        self.correctness = p.copy()
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=np.int64)
            if self.truth.shape != (self.k,) or not np.all(np.isin(self.truth, (-1, 1))):
                raise ValueError('Hidden truth must be {} labels in {{-1, 1}}'.format(self.k))


def _draw(rng, p, truth, abstain):
    shape = (p.size, truth.size)
    correct = rng.random(shape) < p[:, None]
    answers = np.where(correct, truth[None, :], -truth[None, :])
    answers[rng.random(shape) < abstain] = 0
    return answers


def synthesize(spec: SynthSpec) -> Dataset:
    """Seeded synthetic instance. Sources answer correctly with their own probability and abstain with
    the shared one; all-zero fact columns and source rows are redrawn."""
    rng = np.random.default_rng(spec.seed)
    truth = spec.truth if spec.truth is not None else rng.choice(np.array([-1, 1]), size=spec.k)
    A = _draw(rng, spec.correctness, truth, spec.abstain)
    for _ in range(SYNTH_MAX_RESAMPLES):
        empty_facts = np.flatnonzero(~np.any(A != 0, axis=0))
        empty_sources = np.flatnonzero(~np.any(A != 0, axis=1))
        if not empty_facts.size and not empty_sources.size:
            break
        if empty_facts.size:
            A[:, empty_facts] = _draw(rng, spec.correctness, truth[empty_facts], spec.abstain)
        if empty_sources.size:
            A[empty_sources, :] = _draw(rng, spec.correctness[empty_sources], truth, spec.abstain)
    else:
        raise ValueError('Could not draw an instance without empty rows or columns; lower the abstain probability')
    A = A.astype(np.int64)
    return Dataset(answers=A, source_ids=['s{}'.format(i) for i in range(spec.n)],
                   fact_ids=['f{}'.format(j) for j in range(spec.k)], truth=np.asarray(truth, dtype=np.int64),
                   name='synth_{}x{}_seed{}'.format(spec.n, spec.k, spec.seed))
