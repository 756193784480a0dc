import os.path
import shutil

import yaml
from click.testing import CliRunner

from trapcal.cli import ABORT_EXIT_CODE, trapcal
from trapcal.serialization import read_trap_statistics

SCENARIOS = os.path.join(os.path.dirname(__file__), 'scenarios')


def write_spec(directory, **kwargs):
    spec = {
        'name': 'kite',
        'graph': {'builtin': 'diamond_kite'},
        'noise': {'uniform': 0.0},
        'protocol': {'N': 30, 'd': 5, 'w': 0},
        'seed': 3,
    }
    spec.update(kwargs)
    path = os.path.join(str(directory), 'kite.yaml')
    with open(path, 'w') as fh:
        yaml.dump(spec, fh)
    return path


def test_init(tmp_path):
    runner = CliRunner()

    result = runner.invoke(trapcal, ['init', '-d', str(tmp_path)])
    assert result.exit_code == 0
    assert 'Successfully initialized' in result.output
    assert (tmp_path / 'trapcal.yaml').exists()
    assert (tmp_path / 'results').is_dir()

    result = runner.invoke(trapcal, ['init', '-d', str(tmp_path)])
    assert result.exit_code == 0
    assert 'Already initialized' in result.output


def test_plan(tmp_path):
    output = tmp_path / 'plan.json'

    result = CliRunner().invoke(trapcal, ['plan', os.path.join(SCENARIOS, 'path', 'graph.yaml'), '-o', str(output)])

    assert result.exit_code == 0
    assert 'Covered all 4 parameters' in result.output
    assert 'Reference ordering counts: 16, 28' in result.output
    assert output.exists()


def test_experiment_and_estimate(tmp_path):
    runner = CliRunner()
    spec_file = os.path.join(SCENARIOS, 'path', 'experiment.yaml')

    result = runner.invoke(trapcal, ['experiment', spec_file, '--shots', '5000', '--seed', '4',
                                     '--out-dir', str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert '[shots5000]' in result.output
    assert 'mean diff' in result.output
    stats_file = tmp_path / 'stats_shots5000.csv'
    assert read_trap_statistics(stats_file)

    result = runner.invoke(trapcal, ['estimate', os.path.join(SCENARIOS, 'path', 'graph.yaml'), str(stats_file),
                                     '-o', str(tmp_path / 'estimates.csv')])
    assert result.exit_code == 0, result.output
    assert 'rejected rows: 0' in result.output
    assert (tmp_path / 'estimates.csv').exists()


def test_invalid_experiment(tmp_path):
    spec_file = write_spec(tmp_path, shots=[0])

    result = CliRunner().invoke(trapcal, ['experiment', spec_file])

    assert result.exit_code == 1
    assert 'shots' in result.output


def test_protocol_accepts(tmp_path):
    spec_file = write_spec(tmp_path)

    result = CliRunner().invoke(trapcal, ['protocol', spec_file, '--out-dir', str(tmp_path / 'out')])

    assert result.exit_code == 0, result.output
    assert 'Accept: 0 of 25 test rounds failed' in result.output
    assert (tmp_path / 'out' / 'records.yaml').exists()


def test_protocol_detects_deviation(tmp_path):
    spec_file = write_spec(tmp_path)

    result = CliRunner().invoke(trapcal, ['protocol', spec_file, '--attack', '0', '--out-dir', str(tmp_path)])

    assert result.exit_code == ABORT_EXIT_CODE
    assert 'Abort' in result.output


def test_protocol_split_roles_need_tcp(tmp_path):
    spec_file = write_spec(tmp_path)

    result = CliRunner().invoke(trapcal, ['protocol', spec_file, '--role', 'server'])

    assert result.exit_code == 2
    assert 'tcp' in result.output


def test_protocol_over_tcp(tmp_path, free_address):
    spec_file = write_spec(tmp_path)

    result = CliRunner().invoke(trapcal, ['protocol', spec_file, '--transport', 'tcp', '--listen', free_address,
                                          '--out-dir', str(tmp_path / 'out')])

    assert result.exit_code == 0, result.output
    assert 'Accept' in result.output


def test_run(tmp_path, monkeypatch):
    workspace = tmp_path / 'diamond_kite'
    shutil.copytree(os.path.join(SCENARIOS, 'diamond_kite'), str(workspace))
    monkeypatch.chdir(workspace)

    result = CliRunner().invoke(trapcal, ['run', '-k', 'protocol'])

    assert result.exit_code == 0, result.output
    assert 'kite-protocol' in result.output
    assert 'accept' in result.output
    assert (workspace / 'results' / 'kite-protocol' / 'report.yaml').exists()
    assert not (workspace / 'results' / 'kite').exists()
