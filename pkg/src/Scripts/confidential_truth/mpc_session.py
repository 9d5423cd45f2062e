import collections
import logging
import secrets
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

import dealer
import sharing
import transport
import truthfind_mpc as tm
import truthfind_plain as tp
from protocols import MpcContext
from session_config import SessionConfig

LOG = logging.getLogger(__name__)


@dataclass
class PartyResult:
    party: int
    released: bytes
    stats: transport.ChannelStats
    counters: collections.Counter = field(default_factory=collections.Counter)
    iteration_rounds: list = field(default_factory=list)
    consumed: Optional[dealer.DealerBudget] = None
    transcript: Optional[list] = None


@dataclass
class MpcRun:
    state: tp.TruthState
    labels: np.ndarray
    parties: tuple
    errors: Optional[int] = None
    in_domain: bool = True

    @property
    def stats(self) -> transport.ChannelStats:
        return self.parties[0].stats

    def report(self, config: tp.AlgoConfig) -> tp.TruthReport:
        return tp.TruthReport(algorithm=config.algorithm, variant=config.variant, state=self.state,
                              labels=self.labels, errors=self.errors, stats=self.stats,
                              iteration_rounds=list(self.parties[0].iteration_rounds),
                              counters=collections.Counter(self.parties[0].counters))


def make_cursor(party, session: SessionConfig, seed=None, allow_seeded=True) -> dealer.MaterialCursor:
    params = session.params
    if session.dealer_files:
        return dealer.FileDealerCursor(session.dealer_files[party - 1], party, params)
    if not allow_seeded:
        raise ValueError('No dealer files configured. A seeded in-process dealer lets each server compute the '
                         "other's material; set allow_insecure_dealer to use it anyway")
    seed = session.dealer_seed if seed is None else seed
    if seed is None:
        raise ValueError('Seeded dealer needs dealer_seed in the session config')
    return dealer.SeededDealer(party, seed, params)


def _strand(ctx: MpcContext, A: tm.SharedAnswerMatrix, config: tp.AlgoConfig, session: SessionConfig,
            endpoint=None) -> PartyResult:
    try:
        ctx.channel.handshake(session.session_id, session.digest())
        outputs = tm.run_program(A, config, ctx)
        released = tm.release(outputs, ctx, endpoint)
    except Exception:
        LOG.exception('party %d aborted', ctx.party)
        ctx.channel.close()
        raise
    return PartyResult(party=ctx.party, released=released, stats=ctx.channel.stats.snapshot(),
                       counters=collections.Counter(ctx.counters), iteration_rounds=list(ctx.iteration_rounds),
                       consumed=ctx.cursor.consumed, transcript=ctx.channel.transcript)


def share_inputs(A, session: SessionConfig, seed=None):
    return tm.share_answers(A, sharing.make_rng(seed), session.params)


def run_loopback(A, session: SessionConfig, input_seed=None, truth=None, record_transcripts=False) -> MpcRun:
    """Both servers as two threads of this process over an in-process channel. This process is the client."""
    A = tp.answer_matrix(A)
    config = session.algo_config()
    params = session.params
    shares = share_inputs(A, session, input_seed)
    dealer_seed = session.dealer_seed if session.dealer_seed is not None else secrets.randbits(64)
    channels = transport.LoopbackChannel.pair(params)
    contexts = []
    for party, channel in zip((1, 2), channels):
        if record_transcripts:
            channel.transcript = []
        contexts.append(MpcContext(party, channel, make_cursor(party, session, seed=dealer_seed), params,
                                   session.newton_config(), session.truncation))
    try:
        with ThreadPoolExecutor(max_workers=2) as pool:
            futures = [pool.submit(_strand, ctx, share, config, session) for ctx, share in zip(contexts, shares)]
            results = tuple(fut.result() for fut in futures)
    finally:
        for ctx in contexts:
            ctx.cursor.close()
    state = tm.reconstruct_release(results[0].released, results[1].released, params, iteration=config.iters)
    labels = tp.labels_of(state, config.algorithm)
    return MpcRun(state=state, labels=labels, parties=results, errors=tp.count_errors(labels, truth),
                  in_domain=tm.check_release(state, config))


def run_tcp_party(party, session: SessionConfig, A: tm.SharedAnswerMatrix, listener=None,
                  endpoint=None) -> PartyResult:
    """One server of the two-process deployment. Party 1 listens, party 2 connects."""
    party = sharing.check_party(party)
    params = session.params
    cursor = make_cursor(party, session, allow_seeded=session.allow_insecure_dealer)
    try:
        if party == 1:
            own_listener = listener is None
            listener = transport.PartyListener(session.host, session.port) if own_listener else listener
            try:
                channel = listener.accept(params)
            finally:
                if own_listener:
                    listener.close()
        else:
            channel = transport.connect(session.host, session.port, params)
    except Exception:
        cursor.close()
        raise
    ctx = MpcContext(party, channel, cursor, params, session.newton_config(), session.truncation)
    try:
        return _strand(ctx, A, session.algo_config(), session, endpoint)
    finally:
        channel.close()
        cursor.close()
