import csv
import os.path
import shutil
from pathlib import Path

import pytest
import yaml

from trapcal.config import ExperimentSpec, load_document
from trapcal.db import TrapcalDB
from trapcal.estimator import empirical_bias
from trapcal.graphs import build_cluster_state
from trapcal.noise import NoiseMode, lambda_from_p, uniform_model
from trapcal.planner import build_plan
from trapcal.report import build_noise_model, calibrate, default_coloring, derive_seed, plan_for, run_experiment

SCENARIOS = Path(os.path.dirname(__file__)) / 'scenarios'


@pytest.fixture
def kite_workspace(tmp_path):
    workspace = tmp_path / 'diamond_kite'
    shutil.copytree(SCENARIOS / 'diamond_kite', workspace)
    return workspace


def test_diamond_kite_workspace(kite_workspace):
    db = TrapcalDB(kite_workspace)

    experiments = list(db.get_all_experiments())

    assert [spec.name for spec in experiments] == ['kite', 'kite-protocol']
    assert db.get_settings()['bootstrap_resamples'] == 50
    assert db.get_settings()['histogram_bins'] == 40
    assert (kite_workspace / 'results').is_dir()


def test_unknown_setting(kite_workspace):
    config = load_document(kite_workspace / 'trapcal.yaml')
    config['settings']['bins'] = 10
    with open(kite_workspace / 'trapcal.yaml', 'w') as fh:
        yaml.dump(config, fh)

    with pytest.raises(ValueError):
        TrapcalDB(kite_workspace).get_settings()


def test_kite_ordering_comparison(kite_workspace):
    db = TrapcalDB(kite_workspace)
    spec = next(db.get_all_experiments())
    output = db.get_results_directory(spec.name)

    result = run_experiment(spec, output, db.get_settings(), db.data_directory)

    lam = lambda_from_p(0.002)
    comparison, = result.comparisons
    assert comparison.bias_with == pytest.approx(lam ** 5, abs=1e-12)
    assert comparison.bias_with == pytest.approx(0.9867376, abs=1e-6)
    assert comparison.bias_without == pytest.approx(0.9893759, abs=1e-6)
    assert comparison.ratio == pytest.approx(0.997333, abs=1e-6)

    run, = result.runs
    assert run.tag == 'exact'
    assert run.report.summary()['max_abs_diff_x100'] < 1e-8
    for name in ('noise.json', 'plan.json', 'estimates_exact.csv', 'histogram_exact.csv', 'report.yaml',
                 'report.html'):
        assert (output / name).exists()

    overview = load_document(output / 'report.yaml')['overview']
    assert overview['name'] == 'kite'
    assert overview['comparisons'][0]['with'] == 'C'
    assert overview['runs'][0]['unidentified'] == 0

    html = (output / 'report.html').read_text()
    assert 'Diamond kite' in html
    assert '0.997333' in html


def test_kite_protocol_experiment(kite_workspace):
    db = TrapcalDB(kite_workspace)
    spec = list(db.get_all_experiments())[1]
    output = db.get_results_directory(spec.name)

    result = run_experiment(spec, output, db.get_settings(), db.data_directory)

    assert result.protocol.accepted
    assert result.protocol.failed_tests == 0
    records = load_document(output / 'records.yaml')['records']
    assert len(records) == 100
    assert sum(1 for r in records if r['kind'] == 'test') == 50
    assert all('decrypted' in r for r in records if r['kind'] == 'test')
    assert (output / 'stats_protocol.csv').exists()
    assert load_document(output / 'report.yaml')['overview']['protocol']['verdict'] == 'accept'


def test_path_experiment_from_spec_file(tmp_path):
    spec_file = SCENARIOS / 'path' / 'experiment.yaml'
    spec = ExperimentSpec.from_dict(load_document(spec_file), spec_file.parent)

    result = run_experiment(spec, tmp_path, data_directory=spec_file.parent)

    assert result.plan_stats['orderings'] == 2
    run, = result.runs
    assert run.tag == 'shots20000'
    assert run.report.summary()['max_abs_diff_x100'] < 3.0
    assert all(entry.stderr > 0 for entry in run.report.entries)
    with open(tmp_path / 'stats_shots20000.csv', newline='') as fh:
        assert sum(1 for _ in csv.DictReader(fh)) > 0


def test_more_shots_shrink_the_error(tmp_path):
    spec = ExperimentSpec.from_dict({
        'name': 'grid',
        'graph': {'lattice': {'width': 3, 'height': 3}},
        'noise': {'gaussian': {'mean': 0.01, 'std': 0.002}},
        'noise_stds': [0.002],
        'shots': [1000, 100000],
        'seed': 2,
        'bootstrap_resamples': 10,
    })

    result = run_experiment(spec, tmp_path)

    coarse, fine = result.runs
    assert coarse.noise_std == fine.noise_std == 0.002
    assert fine.report.summary()['std_diff'] < coarse.report.summary()['std_diff']
    assert (tmp_path / 'histogram_shots1000_std0.002.csv').exists()
    assert (tmp_path / 'estimates_shots100000_std0.002.csv').exists()
    assert (tmp_path / 'noise_std0.002.json').exists()


def test_calibrate_covers_every_ordering_and_trap(kite):
    plan = build_plan(kite)
    coloring = default_coloring(kite)

    stats = calibrate(kite, plan, uniform_model(kite, 0.01), coloring, 200, seed=1)

    assert len(stats) == len(plan.orderings) * kite.vertex_count
    assert all(stat.shots == 200 for stat in stats)
    assert all(empirical_bias(stat) > 0.5 for stat in stats)


def test_per_qubit_plan_needs_per_qubit_noise(kite):
    with pytest.raises(ValueError):
        plan_for(kite, NoiseMode.PER_QUBIT, uniform_model(kite, 0.01, NoiseMode.PER_EDGE))


def test_crosstalk_noise_model():
    graph = build_cluster_state(3, 2)
    spec = ExperimentSpec.from_dict({
        'name': 'crosstalk',
        'graph': {'lattice': {'width': 3, 'height': 2}},
        'noise': {'uniform': 0.01, 'support': [{'edge': [0, 1], 'qubits': [2]}]},
    }).noise

    model = build_noise_model(spec, graph, seed=0)

    assert model.support[(0, 1)] == frozenset({0, 1, 2})
    assert model.lam(((0, 1), 2)) == pytest.approx(lambda_from_p(0.01))


def test_derive_seed():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)
