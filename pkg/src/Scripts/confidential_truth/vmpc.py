import argparse
import logging
import os
import sys
import time

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import constants as cs
import datasets
import dealer
import mpc_session
import reports
import sharing
import truthfind_mpc as tm
import truthfind_plain as tp
from session_config import SessionConfig

LOG = logging.getLogger('vmpc')

DEFAULT_SEED = 0  # compare and bench are reproducible unless a seed is given


def add_session_flags(p):
    p.add_argument('--config', help='session config JSON; flags below override it')
    p.add_argument('--algo', choices=tp.ALGORITHMS)
    p.add_argument('--variant', help='3est: base|h, cosine: base|fast')
    p.add_argument('--iters', type=int)
    p.add_argument('--truncation', choices=('dealer', 'local'))
    p.add_argument('--seed', type=int)
    p.add_argument('--out-dir')


def add_dataset_flags(p):
    p.add_argument('--dataset', help='answer CSV (source_id,fact_id,answer) or dense matrix file')
    p.add_argument('--ground-truth', help='truth CSV (fact_id,label) or one label per line')
    p.add_argument('--synth', metavar='NxK', help='use a seeded synthetic instance instead of --dataset')
    p.add_argument('--correctness', type=float, default=0.7)
    p.add_argument('--abstain', type=float, default=0.2)


def build_parser():
    parser = argparse.ArgumentParser(prog='vmpc', description='Two-server truth finding over secret shares.')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('dealer', help='generate or size the correlated randomness of a session')
    p.add_argument('action', choices=('gen', 'estimate'))
    add_session_flags(p)
    add_dataset_flags(p)
    p.add_argument('--n', type=int)
    p.add_argument('--k', type=int)

    p = sub.add_parser('share-input', help='split a dataset into the two servers\' share files')
    add_session_flags(p)
    add_dataset_flags(p)

    p = sub.add_parser('party', help='run one server of the TCP deployment')
    add_session_flags(p)
    p.add_argument('--id', type=int, choices=sharing.PARTIES, required=True)
    p.add_argument('--share-file', required=True)
    p.add_argument('--dealer-file')
    p.add_argument('--host')
    p.add_argument('--port', type=int)

    p = sub.add_parser('release-server', help='collect both servers\' output shares and reconstruct')
    add_session_flags(p)

    p = sub.add_parser('reveal', help='reconstruct from the two output files the servers wrote')
    add_session_flags(p)
    p.add_argument('outputs', nargs=2)

    for name, text in (('run-plain', 'plaintext reference run'), ('run-mpc', 'loopback run over shares'),
                       ('compare', 'plaintext and loopback MPC on the same data, with an error report')):
        p = sub.add_parser(name, help=text)
        add_session_flags(p)
        add_dataset_flags(p)

    p = sub.add_parser('bench', help='rounds, bytes and time per variant over synthetic sizes')
    add_session_flags(p)
    p.add_argument('--sizes', default='10x20,30x60', help='comma-separated NxK list')
    p.add_argument('--variants', help='comma-separated variants of --algo (default: all)')
    p.add_argument('--correctness', type=float, default=0.7)
    p.add_argument('--abstain', type=float, default=0.2)

    p = sub.add_parser('synth', help='write a seeded synthetic dataset and its ground truth')
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--k', type=int, required=True)
    p.add_argument('--seed', type=int, default=DEFAULT_SEED)
    p.add_argument('--correctness', type=float, default=0.7)
    p.add_argument('--abstain', type=float, default=0.2)
    p.add_argument('--out-dir', default='.')
    return parser


def parse_size(text):
    try:
        n, k = text.lower().split('x')
        return int(n), int(k)
    except ValueError:
        raise ValueError('Sizes look like 30x60, got {!r}'.format(text))


def session_from_args(args) -> SessionConfig:
    session = SessionConfig.load(args.config) if args.config else SessionConfig()
    return session.replace(algorithm=args.algo, variant=args.variant, iters=args.iters,
                           truncation=args.truncation, host=getattr(args, 'host', None),
                           port=getattr(args, 'port', None))


def dataset_from_args(args, seed) -> datasets.Dataset:
    if args.dataset:
        return datasets.load_dataset(args.dataset, args.ground_truth)
    if args.synth:
        n, k = parse_size(args.synth)
        return datasets.synthesize(datasets.SynthSpec(seed=seed, n=n, k=k, correctness=args.correctness,
                                                      abstain=args.abstain))
    raise ValueError('Give --dataset or --synth')


def seed_of(args):
    return DEFAULT_SEED if args.seed is None else args.seed


def out_path(args, filename):
    out_dir = args.out_dir or '.'
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, filename)


def sized(session: SessionConfig, data: datasets.Dataset) -> SessionConfig:
    n, k = data.shape
    return session.replace(n=n, k=k)


def cmd_dealer(args):
    session = session_from_args(args)
    if args.dataset or args.synth:
        session = sized(session, dataset_from_args(args, seed_of(args)))
    session = session.replace(n=args.n, k=args.k)
    budget = dealer.estimate_budget(session.algorithm, session.variant, session.n, session.k, session.iters,
                                    session.params, session.newton_config(), session.truncation)
    print('{} {} on {}x{}, T={}: {} ({} random bit shares)'.format(
        session.algorithm, session.variant, session.n, session.k, session.iters, budget,
        budget.random_bits(session.params)))
    if args.action == 'estimate':
        return 0
    paths = (out_path(args, 'dealer_p1.bin'), out_path(args, 'dealer_p2.bin'))
    dealer.generate(budget, args.seed, paths, session.params)
    session = session.replace(dealer_files=list(paths))
    session.save(out_path(args, 'session.json'))
    print('Wrote {} and {}'.format(*paths))
    return 0


def cmd_share_input(args):
    session = session_from_args(args)
    data = dataset_from_args(args, seed_of(args))
    session = sized(session, data)
    s1, s2 = mpc_session.share_inputs(data.answers, session, args.seed)
    for share in (s1, s2):
        sharing.write_share_file(out_path(args, 'answers_p{}.share'.format(share.owner)), share.shares)
    session.save(out_path(args, 'session.json'))
    print('Shared a {}x{} answer matrix into {}'.format(session.n, session.k, args.out_dir or '.'))
    return 0


def cmd_party(args):
    session = session_from_args(args)
    if args.dealer_file:
        files = list(session.dealer_files) or ['', '']
        files[args.id - 1] = args.dealer_file
        session = session.replace(dealer_files=files)
    if session.n < 1 or session.k < 1:
        raise ValueError('The session config must carry the matrix size (n, k); run share-input first')
    shares = sharing.read_share_file(args.share_file, args.id, session.params)
    A = tm.SharedAnswerMatrix(shares, session.n, session.k)
    endpoint = None
    if session.release_host:
        import release_server
        endpoint = release_server.ReleaseClient(session.release_host, session.release_port)
    print('Party {} starting ({} {} on {}x{})'.format(args.id, session.algorithm, session.variant,
                                                      session.n, session.k))
    result = mpc_session.run_tcp_party(args.id, session, A, endpoint=endpoint)
    if endpoint is None:
        path = out_path(args, 'output_p{}.bin'.format(args.id))
        with open(path, 'wb') as fh:
            fh.write(result.released)
        print('Output shares written to {}'.format(path))
    stats = result.stats
    print('Party {} done: {} rounds, {} bytes sent, {} bytes received'.format(
        args.id, stats.rounds, stats.bytes_sent, stats.bytes_received))
    return 0


def _print_state(state: tp.TruthState, session: SessionConfig):
    if not tm.check_release(state, session.algo_config()):
        print('warning: outputs break their public bounds, see the log')
    labels = tp.labels_of(state, session.algorithm)
    print('y      =', ' '.join('{:.4f}'.format(v) for v in state.y))
    print('theta  =', ' '.join('{:.4f}'.format(v) for v in state.theta))
    print('labels =', ' '.join(str(int(v)) for v in labels))


def cmd_release_server(args):
    import release_server
    session = session_from_args(args)
    collector = release_server.ReleaseCollector(session.params, session.iters, session.algorithm)
    state = release_server.serve_until_released(collector, session.release_host or cs.RELEASE_HOST,
                                                session.release_port)
    if state is None:
        return 1
    _print_state(state, session)
    return 0


def cmd_reveal(args):
    session = session_from_args(args)
    blobs = []
    for path in args.outputs:
        with open(path, 'rb') as fh:
            blobs.append(fh.read())
    _print_state(tm.reconstruct_release(blobs[0], blobs[1], session.params, session.iters), session)
    return 0


def cmd_run_plain(args):
    session = session_from_args(args)
    data = dataset_from_args(args, seed_of(args))
    report = tp.run(data.answers, session.algo_config(), data.truth)
    print('plain {}: {}x{} label errors {}'.format(session.algo_config(), *data.shape, report.errors))
    if report.domain_slack is not None:
        print('trust sum slack: {:.4g}'.format(report.domain_slack))
    if args.out_dir:
        reports.write_truth(out_path(args, 'plain.csv'), report, data.fact_ids, data.source_ids)
    return 0


def _loopback(data, session, seed):
    session = sized(session, data)
    if session.dealer_seed is None and not session.dealer_files:
        session = session.replace(dealer_seed=seed + 1)
    return mpc_session.run_loopback(data.answers, session, input_seed=seed, truth=data.truth)


def cmd_run_mpc(args):
    session = session_from_args(args)
    seed = seed_of(args)
    data = dataset_from_args(args, seed)
    run = _loopback(data, session, seed)
    report = run.report(session.algo_config())
    print('mpc {}: {}x{} label errors {}, {} rounds'.format(session.algo_config(), *data.shape, report.errors,
                                                            run.stats.rounds))
    if args.out_dir:
        reports.write_truth(out_path(args, 'mpc.csv'), report, data.fact_ids, data.source_ids)
    return 0


def cmd_compare(args):
    session = session_from_args(args)
    seed = seed_of(args)
    data = dataset_from_args(args, seed)
    config = session.algo_config()

    start = time.perf_counter()
    plain = tp.run(data.answers, config, data.truth)
    plain_seconds = time.perf_counter() - start
    start = time.perf_counter()
    run = _loopback(data, session, seed)
    mpc_seconds = time.perf_counter() - start

    bundle = reports.ReportBundle(name=data.name, config=sized(session, data).public_dict(), plain=plain,
                                  mpc=run.report(config), party_stats=tuple(p.stats for p in run.parties),
                                  timings={'plain': plain_seconds, 'mpc': mpc_seconds},
                                  source_ids=data.source_ids, fact_ids=data.fact_ids, truth=data.truth)
    bundle.write(args.out_dir or '.')
    print('\n'.join(bundle.summary_lines()))
    return 0


def cmd_bench(args):
    session = session_from_args(args)
    seed = seed_of(args)
    variants = args.variants.split(',') if args.variants else sorted(tp.VARIANTS[session.algorithm])
    rows = []
    for size in args.sizes.split(','):
        n, k = parse_size(size)
        data = datasets.synthesize(datasets.SynthSpec(seed=seed, n=n, k=k, correctness=args.correctness,
                                                      abstain=args.abstain))
        for variant in variants:
            variant_session = session.replace(variant=variant)
            start = time.perf_counter()
            run = _loopback(data, variant_session, seed)
            seconds = time.perf_counter() - start
            row = reports.bench_row(run.report(variant_session.algo_config()), n, k, session.iters,
                                    session.truncation, run.parties[0].consumed, seconds)
            rows.append(row)
            print('{algorithm} {variant} {n}x{k}: {rounds_per_iter} rounds/iter, {bytes_sent} B, '
                  '{seconds} s'.format(**row))
    reports.write_bench(out_path(args, 'bench.csv'), rows)
    return 0


def cmd_synth(args):
    data = datasets.synthesize(datasets.SynthSpec(seed=args.seed, n=args.n, k=args.k, correctness=args.correctness,
                                                  abstain=args.abstain))
    os.makedirs(args.out_dir, exist_ok=True)
    answers = os.path.join(args.out_dir, data.name + '.csv')
    truth = os.path.join(args.out_dir, data.name + '_truth.csv')
    datasets.save_dataset(answers, data)
    datasets.save_truth(truth, data)
    print('Wrote {} and {}'.format(answers, truth))
    return 0


COMMANDS = {
    'dealer': cmd_dealer,
    'share-input': cmd_share_input,
    'party': cmd_party,
    'release-server': cmd_release_server,
    'reveal': cmd_reveal,
    'run-plain': cmd_run_plain,
    'run-mpc': cmd_run_mpc,
    'compare': cmd_compare,
    'bench': cmd_bench,
    'synth': cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, cs.LOG_LEVEL, logging.WARNING),
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print('vmpc: interrupted', file=sys.stderr)
        return 1
    except Exception as e:
        LOG.debug('command %s failed', args.command, exc_info=True)
        print('vmpc: error: {}'.format(e), file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
