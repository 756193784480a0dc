import numpy as np
import pytest

from trapcal.graphs import build_cluster_state, build_path
from trapcal.noise import (GaussianSpec, NoiseMode, crosstalk_model, faulty_gate_model, lambda_from_p, p_from_lambda,
                           sample_gaussian_model, uniform_model)


def test_lambda_from_p():
    assert lambda_from_p(0.002) == pytest.approx(0.9973333333, abs=1e-9)
    assert lambda_from_p(0.0) == 1.0
    assert lambda_from_p(0.75) == pytest.approx(0.0)
    assert p_from_lambda(lambda_from_p(0.0123)) == pytest.approx(0.0123, abs=1e-15)

    with pytest.raises(ValueError):
        lambda_from_p(1.5)


def test_uniform_kite(kite):
    model = uniform_model(kite, 0.002)

    assert len(model.parameter_keys()) == 10
    assert all(lam == pytest.approx(0.9973333333) for lam in model.lambdas.values())
    assert model.channels((0, 1)) == ((0, 0.002), (1, 0.002))


def test_uniform_grid_parameter_count():
    model = uniform_model(build_cluster_state(12, 12), 0.01)

    assert len(model.parameter_keys()) == 528


def test_uniform_per_edge(kite):
    model = uniform_model(kite, 0.002, NoiseMode.PER_EDGE)

    assert model.parameter_keys() == list(kite.edges)
    with pytest.raises(ValueError):
        model.channels((0, 1))


def test_noiseless(kite):
    assert uniform_model(kite, 0.0).is_noiseless


def test_gaussian_is_deterministic():
    grid = build_cluster_state(12, 12)
    spec = GaussianSpec(1e-2, 2e-3)

    first = sample_gaussian_model(grid, spec, 7)
    second = sample_gaussian_model(grid, spec, 7)

    assert first.lambdas == second.lambdas
    assert first.lambdas != sample_gaussian_model(grid, spec, 8).lambdas


def test_gaussian_sample_mean():
    grid = build_cluster_state(12, 12)
    model = sample_gaussian_model(grid, GaussianSpec(1e-2, 2e-3), 3)

    probs = np.array([model.error_probability(key) for key in model.parameter_keys()])

    assert len(probs) == 528
    assert abs(probs.mean() - 1e-2) < 5 * probs.std(ddof=1) / np.sqrt(len(probs))
    assert np.all(probs >= 0.0) and np.all(probs <= 1.0)


def test_gaussian_without_spread_is_uniform():
    grid = build_cluster_state(3, 3)

    model = sample_gaussian_model(grid, GaussianSpec(1e-2, 0.0), 11)

    assert model.lambdas == uniform_model(grid, 1e-2).lambdas


def test_gaussian_spec_validation():
    with pytest.raises(ValueError):
        GaussianSpec(1e-2, -1.0)


def test_crosstalk_adds_parameter():
    grid = build_cluster_state(3, 3)
    support = {(0, 1): {0, 1, 2}}
    lambdas = {(edge, u): 0.99 for edge in grid.edges for u in edge}
    lambdas[((0, 1), 2)] = 0.98

    model = crosstalk_model(grid, support, lambdas)

    assert model.lam(((0, 1), 2)) == 0.98
    assert model.support[(0, 1)] == frozenset({0, 1, 2})
    assert len(model.parameter_keys()) == 2 * len(grid.edges) + 1


def test_crosstalk_validation():
    grid = build_cluster_state(3, 3)
    lambdas = {(edge, u): 0.99 for edge in grid.edges for u in edge}

    with pytest.raises(ValueError):
        crosstalk_model(grid, {(0, 1): {0, 2}}, lambdas)
    with pytest.raises(ValueError):
        crosstalk_model(grid, {(0, 1): {0, 1, 2}}, lambdas)


def test_faulty_gate_model():
    path = build_path(3)

    model = faulty_gate_model(path, (1, 0), {0: 0.03})

    assert model.error_probability(((0, 1), 0)) == 0.03
    assert model.error_probability(((0, 1), 1)) == 0.0
    assert model.lam(((1, 2), 1)) == 1.0

    with pytest.raises(ValueError):
        faulty_gate_model(path, (0, 2), {0: 0.03})


def test_effective_edge_lambda(kite):
    model = uniform_model(kite, 0.002)

    assert model.effective_edge_lambda((1, 2)) == pytest.approx(lambda_from_p(0.002) ** 2)
