import csv
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

import constants as cs
import truthfind_plain as tp

LOG = logging.getLogger(__name__)

# bucket edges for |MPC - plain|: [0, 1e-8), [1e-8, 1e-7), ..., [1e-1, inf)
HIST_EDGES = tuple([0.0] + [10.0 ** e for e in range(-8, 0)] + [float('inf')])
QUANTITIES = ('y', 'theta', 'delta')
BENCH_FIELDS = ('algorithm', 'variant', 'n', 'k', 'iters', 'truncation', 'rounds', 'rounds_per_iter',
                'first_iter_rounds', 'bytes_sent', 'ltz', 'sign', 'inv', 'sqrt_inv', 'triples', 'truncations',
                'masks', 'seconds')


def _fmt(x):
    return '{:.10g}'.format(float(x))


def error_histogram(diffs) -> list:
    """Counts of absolute errors per power-of-ten bucket. Returns (lo, hi, count) rows."""
    diffs = np.abs(np.asarray(diffs, dtype=np.float64).ravel())
    idx = np.searchsorted(np.asarray(HIST_EDGES[1:-1]), diffs, side='right')
    counts = np.bincount(idx, minlength=len(HIST_EDGES) - 1)
    return [(HIST_EDGES[i], HIST_EDGES[i + 1], int(c)) for i, c in enumerate(counts)]


@dataclass
class ReportBundle:
    name: str
    config: dict
    plain: tp.TruthReport
    mpc: tp.TruthReport
    party_stats: tuple = ()
    timings: dict = field(default_factory=dict)
    source_ids: Optional[list] = None
    fact_ids: Optional[list] = None
    truth: Optional[np.ndarray] = None

    def errors(self) -> dict:
        out = {}
        for name in QUANTITIES:
            a, b = getattr(self.plain.state, name), getattr(self.mpc.state, name)
            if a is not None and b is not None:
                out[name] = np.abs(np.asarray(b) - np.asarray(a))
        return out

    @property
    def max_error(self) -> float:
        return max(float(np.max(d)) for d in self.errors().values())

    def label_flips(self, margin=cs.TIE_MARGIN) -> np.ndarray:
        """Facts labelled differently, ignoring those whose plain value sits within `margin` of the threshold."""
        threshold = 0.5 if self.plain.algorithm == '3est' else 0.0
        outside = np.abs(self.plain.state.y - threshold) > margin
        return np.flatnonzero((self.plain.labels != self.mpc.labels) & outside)

    def histogram(self) -> list:
        errors = self.errors()
        per_quantity = {name: error_histogram(d) for name, d in errors.items()}
        combined = error_histogram(np.concatenate(list(errors.values())))
        rows = []
        for i, (lo, hi, count) in enumerate(combined):
            rows.append([lo, hi] + [per_quantity[name][i][2] if name in per_quantity else 0 for name in QUANTITIES]
                        + [count])
        return rows

    def summary_lines(self) -> list:
        k = self.plain.labels.size
        lines = ['dataset: {}'.format(self.name),
                 'algorithm: {} variant: {}'.format(self.plain.algorithm, self.plain.variant),
                 'config: {}'.format(json.dumps(self.config, sort_keys=True)),
                 'facts: {} sources: {}'.format(k, self.plain.state.theta.size),
                 'max |mpc - plain|: {:.3e}'.format(self.max_error),
                 'label flips (outside tie margin {}): {}'.format(cs.TIE_MARGIN, self.label_flips().size)]
        if self.plain.errors is not None:
            lines.append('label errors: plain {} mpc {}'.format(self.plain.errors, self.mpc.errors))
        if self.plain.domain_slack is not None:
            lines.append('trust sum slack: {:.4g}{}'.format(
                self.plain.domain_slack, '' if self.plain.domain_slack >= 0 else ' (outside the public domain)'))
        for party, stats in enumerate(self.party_stats, start=1):
            lines.append('party {}: rounds {} opens {} sent {} B received {} B'.format(
                party, stats.rounds, stats.opens, stats.bytes_sent, stats.bytes_received))
        if self.mpc.iteration_rounds:
            lines.append('rounds per iteration: first {} steady {}'.format(
                self.mpc.iteration_rounds[0], self.mpc.iteration_rounds[-1]))
        if self.mpc.counters:
            lines.append('protocol calls: ' + ' '.join('{}={}'.format(key, self.mpc.counters[key])
                                                       for key in sorted(self.mpc.counters)))
        return lines

    def write(self, out_dir) -> list:
        """Writes the CSVs and summary.txt. Everything except timing.csv depends only on inputs and seeds."""
        os.makedirs(out_dir, exist_ok=True)
        k, n = self.plain.labels.size, self.plain.state.theta.size
        fact_ids = self.fact_ids or [str(j) for j in range(k)]
        source_ids = self.source_ids or [str(i) for i in range(n)]
        paths = []

        def emit(filename, header, rows):
            path = os.path.join(out_dir, filename)
            with open(path, 'w', newline='') as fh:
                writer = csv.writer(fh, lineterminator='\n')
                writer.writerow(header)
                writer.writerows(rows)
            paths.append(path)

        plain, mpc = self.plain.state, self.mpc.state
        fact_header = ['fact_id', 'y_plain', 'y_mpc', 'label_plain', 'label_mpc']
        if plain.delta is not None:
            fact_header[3:3] = ['delta_plain', 'delta_mpc']
        if self.truth is not None:
            fact_header.append('truth')
        fact_rows = []
        for j in range(k):
            row = [fact_ids[j], _fmt(plain.y[j]), _fmt(mpc.y[j])]
            if plain.delta is not None:
                row += [_fmt(plain.delta[j]), _fmt(mpc.delta[j])]
            row += [int(self.plain.labels[j]), int(self.mpc.labels[j])]
            if self.truth is not None:
                row.append(int(self.truth[j]))
            fact_rows.append(row)
        emit('facts.csv', fact_header, fact_rows)
        emit('sources.csv', ['source_id', 'theta_plain', 'theta_mpc'],
             [[source_ids[i], _fmt(plain.theta[i]), _fmt(mpc.theta[i])] for i in range(n)])
        emit('error_histogram.csv', ['bucket_lo', 'bucket_hi'] + list(QUANTITIES) + ['all'],
             [[_fmt(row[0]), _fmt(row[1])] + row[2:] for row in self.histogram()])
        emit('stats.csv', ['party', 'rounds', 'opens', 'bytes_sent', 'bytes_received'],
             [[p, s.rounds, s.opens, s.bytes_sent, s.bytes_received] for p, s in enumerate(self.party_stats, 1)])
        emit('iteration_rounds.csv', ['iteration', 'rounds'],
             [[t + 1, r] for t, r in enumerate(self.mpc.iteration_rounds)])
        emit('timing.csv', ['phase', 'seconds'], [[key, '{:.3f}'.format(val)] for key, val in self.timings.items()])

        path = os.path.join(out_dir, 'summary.txt')
        with open(path, 'w') as fh:
            fh.write('\n'.join(self.summary_lines()) + '\n')
        paths.append(path)
        LOG.info('report written to %s', out_dir)
        return paths


def bench_row(report: tp.TruthReport, n, k, iters, truncation, consumed, seconds) -> dict:
    stats = report.stats
    rounds = report.iteration_rounds
    counters = report.counters
    return {'algorithm': report.algorithm, 'variant': report.variant, 'n': n, 'k': k, 'iters': iters,
            'truncation': truncation, 'rounds': stats.rounds,
            'rounds_per_iter': rounds[-1] if rounds else 0, 'first_iter_rounds': rounds[0] if rounds else 0,
            'bytes_sent': stats.bytes_sent, 'ltz': counters.get('ltz', 0), 'sign': counters.get('sign', 0),
            'inv': counters.get('inv', 0), 'sqrt_inv': counters.get('sqrt_inv', 0),
            'triples': consumed.triples, 'truncations': consumed.truncations, 'masks': consumed.masks,
            'seconds': '{:.3f}'.format(seconds)}


def write_bench(path, rows):
    with open(path, 'w', newline='') as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
    LOG.info('bench rows written to %s', path)
    return path


def write_truth(path, report: tp.TruthReport, fact_ids=None, source_ids=None):
    """Single-run output: one row per fact, then the per-source trust in a sibling file."""
    state = report.state
    fact_ids = fact_ids or [str(j) for j in range(state.y.size)]
    source_ids = source_ids or [str(i) for i in range(state.theta.size)]
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['fact_id', 'y', 'delta', 'label'] if state.delta is not None else ['fact_id', 'y', 'label'])
        for j, fact in enumerate(fact_ids):
            extra = [_fmt(state.delta[j])] if state.delta is not None else []
            writer.writerow([fact, _fmt(state.y[j])] + extra + [int(report.labels[j])])
    trust_path = os.path.splitext(path)[0] + '_sources.csv'
    with open(trust_path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(['source_id', 'theta'])
        writer.writerows([source, _fmt(state.theta[i])] for i, source in enumerate(source_ids))
    return path, trust_path
