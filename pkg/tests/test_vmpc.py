import os
import threading

import pytest

import transport
import vmpc


def _free_port():
    listener = transport.PartyListener('127.0.0.1', 0)
    port = listener.port
    listener.close()
    return port


def test_synth_then_run_plain(tmp_path, capsys):
    out = str(tmp_path)
    assert vmpc.main(['synth', '--n', '4', '--k', '6', '--seed', '3', '--out-dir', out]) == 0
    answers = os.path.join(out, 'synth_4x6_seed3.csv')
    truth = os.path.join(out, 'synth_4x6_seed3_truth.csv')
    assert os.path.isfile(answers) and os.path.isfile(truth)
    assert vmpc.main(['run-plain', '--dataset', answers, '--ground-truth', truth, '--algo', 'cosine',
                      '--out-dir', out]) == 0
    assert os.path.isfile(os.path.join(out, 'plain.csv'))
    assert os.path.isfile(os.path.join(out, 'plain_sources.csv'))
    assert 'label errors' in capsys.readouterr().out


def test_compare_is_reproducible(tmp_path, capsys):
    args = ['compare', '--algo', '3est', '--variant', 'h', '--iters', '3', '--synth', '6x10', '--seed', '1']
    assert vmpc.main(args + ['--out-dir', str(tmp_path / 'a')]) == 0
    assert vmpc.main(args + ['--out-dir', str(tmp_path / 'b')]) == 0
    assert 'label flips (outside tie margin 0.001): 0' in capsys.readouterr().out
    names = sorted(os.listdir(tmp_path / 'a'))
    assert 'summary.txt' in names and 'error_histogram.csv' in names
    for name in names:
        if name != 'timing.csv':
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes(), name


def test_run_mpc_and_bench(tmp_path):
    assert vmpc.main(['run-mpc', '--algo', 'cosine', '--variant', 'fast', '--iters', '2', '--synth', '4x6',
                      '--out-dir', str(tmp_path)]) == 0
    assert os.path.isfile(tmp_path / 'mpc.csv')
    assert vmpc.main(['bench', '--algo', '3est', '--iters', '1', '--sizes', '4x6', '--variants', 'h',
                      '--out-dir', str(tmp_path)]) == 0
    lines = (tmp_path / 'bench.csv').read_text().splitlines()
    assert len(lines) == 2 and lines[0].startswith('algorithm,variant,n,k')


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / 'bad.csv'
    bad.write_text('source_id,fact_id,answer\na,q1,7\n')
    assert vmpc.main(['run-plain', '--dataset', str(bad)]) == 1
    assert 'vmpc: error:' in capsys.readouterr().err
    assert vmpc.main(['run-plain']) == 1
    with pytest.raises(SystemExit):
        vmpc.main(['run-plain', '--algo', 'truthfinder'])


def test_dealer_estimate(capsys):
    assert vmpc.main(['dealer', 'estimate', '--algo', '3est', '--variant', 'h', '--iters', '2', '--n', '3',
                      '--k', '4']) == 0
    assert '3est h on 3x4, T=2' in capsys.readouterr().out


def test_two_party_deployment(tmp_path, capsys):
    out = str(tmp_path)
    session = os.path.join(out, 'session.json')
    common = ['--algo', '3est', '--variant', 'h', '--iters', '2']
    assert vmpc.main(['dealer', 'gen'] + common + ['--synth', '4x6', '--seed', '2', '--out-dir', out]) == 0
    assert vmpc.main(['share-input', '--config', session, '--synth', '4x6', '--seed', '2', '--out-dir', out]) == 0

    port = str(_free_port())
    codes = {}

    def party(i):
        codes[i] = vmpc.main(['party', '--config', session, '--id', str(i), '--host', '127.0.0.1', '--port', port,
                              '--share-file', os.path.join(out, 'answers_p{}.share'.format(i)), '--out-dir', out])

    threads = [threading.Thread(target=party, args=(i,)) for i in (1, 2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(120)
    assert codes == {1: 0, 2: 0}
    capsys.readouterr()
    assert vmpc.main(['reveal', '--config', session, os.path.join(out, 'output_p1.bin'),
                      os.path.join(out, 'output_p2.bin')]) == 0
    assert 'labels =' in capsys.readouterr().out
