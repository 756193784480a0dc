import math

import numpy as np
import pytest

from trapcal.circuit import simulate_test_round_mc
from trapcal.estimator import (InsufficientSignalError, TrapStatistic, bootstrap_stderr, build_design_matrix,
                               design_matrix_from_biases, empirical_bias, error_report, estimate_from_equations,
                               exact_biases, histogram, merge_statistics, ratio_estimate, solve_log_least_squares,
                               true_parameters)
from trapcal.graphs import Graph, build_cluster_state, greedy_color, largest_first_order
from trapcal.noise import GaussianSpec, NoiseMode, sample_gaussian_model, uniform_model
from trapcal.planner import build_plan


def random_graph(rng, vertices, density=0.25):
    edges = [(u, v) for u in range(vertices) for v in range(u + 1, vertices) if rng.random() < density]
    return Graph(vertices, tuple(edges or [(0, 1)]))


def sampled_statistics(graph, plan, noise, shots, seed):
    coloring = greedy_color(graph, largest_first_order(graph))
    stats = []
    for ordering in plan.orderings:
        for color, traps in enumerate(coloring.classes()):
            result = simulate_test_round_mc(graph, ordering, noise, traps, shots, seed=seed + color)
            stats.extend(TrapStatistic(ordering.ordering_id, v, shots, result.failures(v)) for v in traps)
    return stats


def test_oracle_biases_recover_parameters():
    rng = np.random.default_rng(99)

    for instance in range(6):
        graph = random_graph(rng, int(rng.integers(6, 21)))
        truth = sample_gaussian_model(graph, GaussianSpec(0.02, 0.008), instance)
        plan = build_plan(graph)

        matrix = design_matrix_from_biases(plan, exact_biases(plan, graph, truth), graph)
        solution = solve_log_least_squares(matrix)

        assert not plan.unidentifiable
        assert not solution.null_keys
        for key, lam in solution.lambdas.items():
            assert lam == pytest.approx(truth.lam(key), rel=1e-8)


def test_equation_estimates_match_least_squares(kite):
    truth = sample_gaussian_model(kite, GaussianSpec(0.01, 0.002), 4)
    plan = build_plan(kite)
    biases = exact_biases(plan, kite, truth)

    ratios = estimate_from_equations(plan, biases)
    solution = solve_log_least_squares(design_matrix_from_biases(plan, biases, kite))

    assert set(ratios) == set(truth.lambdas)
    for key, lam in ratios.items():
        assert lam == pytest.approx(truth.lam(key), rel=1e-10)
        assert lam == pytest.approx(solution.lambdas[key], rel=1e-8)


def test_ratio_estimate():
    assert ratio_estimate(0.9867376, 0.9893759) == pytest.approx(0.997333, abs=1e-6)

    with pytest.raises(InsufficientSignalError):
        ratio_estimate(0.5, 0.0)


def test_empirical_bias():
    assert empirical_bias(TrapStatistic('a', 0, 100, 5)) == 0.9

    with pytest.raises(ValueError):
        empirical_bias(TrapStatistic('a', 0, 0, 0))
    with pytest.raises(ValueError):
        TrapStatistic('a', 0, 10, 11)


def test_merge_statistics():
    merged = merge_statistics([TrapStatistic('a', 0, 10, 1), TrapStatistic('b', 0, 5, 0),
                               TrapStatistic('a', 0, 30, 2)])

    assert merged == [TrapStatistic('a', 0, 40, 3), TrapStatistic('b', 0, 5, 0)]


def test_more_failures_never_raise_the_bias(kite):
    plan = build_plan(kite)
    ordering_id = plan.ordering_ids[0]

    rhs = []
    for failures in range(0, 500, 50):
        matrix = build_design_matrix(plan, [TrapStatistic(ordering_id, 0, 1000, failures)], kite)
        rhs.append(matrix.rhs[0])

    assert all(a >= b for a, b in zip(rhs, rhs[1:]))


def test_non_positive_bias_rows_are_dropped(kite):
    plan = build_plan(kite)
    first, second = plan.ordering_ids[:2]

    matrix = build_design_matrix(plan, [TrapStatistic(first, 0, 100, 60), TrapStatistic(second, 0, 100, 1)], kite)

    assert matrix.dropped_rows == 1
    assert matrix.rows == [(second, 0)]


def test_unknown_ordering_in_statistics(kite):
    with pytest.raises(ValueError):
        build_design_matrix(build_plan(kite), [TrapStatistic('nope', 0, 10, 0)], kite)


def test_empty_design_matrix(kite):
    matrix = build_design_matrix(build_plan(kite), [], kite)

    with pytest.raises(InsufficientSignalError):
        solve_log_least_squares(matrix)


def test_rank_deficiency_is_reported(kite):
    plan = build_plan(kite)
    ordering_id = plan.ordering_ids[0]
    biases = {(ordering_id, 0): 0.95}

    solution = solve_log_least_squares(design_matrix_from_biases(plan, biases, kite))

    assert solution.rank == 1
    assert len(solution.keys) > 1
    assert solution.null_keys == solution.keys


def test_sampled_estimates_and_bootstrap(kite):
    truth = uniform_model(kite, 0.01)
    plan = build_plan(kite)

    coarse = build_design_matrix(plan, sampled_statistics(kite, plan, truth, 2000, 1), kite)
    fine = build_design_matrix(plan, sampled_statistics(kite, plan, truth, 200000, 1), kite)

    errors = []
    for matrix in (coarse, fine):
        solution = solve_log_least_squares(matrix)
        diffs = [solution.lambdas[key] - truth.lam(key) for key in solution.keys]
        errors.append(math.sqrt(np.mean(np.square(diffs))))

    assert errors[1] < errors[0] / 3

    coarse_err = bootstrap_stderr(coarse, resamples=50, seed=2)
    fine_err = bootstrap_stderr(fine, resamples=50, seed=2)
    assert all(np.isfinite(list(coarse_err.values())))
    assert np.mean(list(fine_err.values())) < np.mean(list(coarse_err.values()))


def test_bootstrap_of_exact_matrix(kite):
    truth = uniform_model(kite, 0.01)
    plan = build_plan(kite)
    matrix = design_matrix_from_biases(plan, exact_biases(plan, kite, truth), kite)

    assert set(bootstrap_stderr(matrix).values()) == {0.0}
    with pytest.raises(ValueError):
        bootstrap_stderr(matrix, resamples=1)


def test_true_parameters_for_edge_estimates(kite):
    truth = sample_gaussian_model(kite, GaussianSpec(0.01, 0.003), 12)
    plan = build_plan(kite, NoiseMode.PER_EDGE)

    expected = true_parameters(plan, kite, truth)

    assert set(expected) == set(kite.edges)
    for (u, v), lam in expected.items():
        endpoint_values = [truth.lam(((u, v), u)), truth.lam(((u, v), v))]
        assert min(abs(lam - value) for value in endpoint_values) < 1e-12


def test_true_parameters_need_qubit_truth(kite):
    with pytest.raises(ValueError):
        true_parameters(build_plan(kite), kite, uniform_model(kite, 0.01, NoiseMode.PER_EDGE))


def test_error_report():
    truth = {((0, 1), 0): 0.99, ((0, 1), 1): 0.98}

    exact = error_report(dict(truth), truth)
    off = error_report({((0, 1), 0): 0.991, ((0, 1), 1): 0.98}, truth)

    assert set(exact.diffs) == {0.0}
    assert off.entries[0].abs_diff_x100 == pytest.approx(0.1)
    assert off.summary()['parameters'] == 2

    with pytest.raises(ValueError):
        error_report({((1, 2), 1): 0.9}, truth)


def test_histogram():
    bins = histogram([-1e-3, 0.0, 0.0, 2e-3], bins=3)

    assert len(bins) == 3
    assert sum(b.count for b in bins) == 4
    assert bins[0].left == pytest.approx(-1e-3)
    assert bins[-1].right == pytest.approx(2e-3)
    assert histogram([], bins=3) == []


def binomial_statistics(biases, shots, rng):
    return [TrapStatistic(ordering_id, trap, shots, int(rng.binomial(shots, (1.0 - bias) / 2.0)))
            for (ordering_id, trap), bias in sorted(biases.items())]


def signed_errors(plan, graph, truth, biases, shots, seed):
    matrix = build_design_matrix(plan, binomial_statistics(biases, shots, np.random.default_rng(seed)), graph)
    solution = solve_log_least_squares(matrix)
    truth_params = true_parameters(plan, graph, truth)
    return np.array([solution.lambdas[key] - truth_params[key] for key in solution.keys
                     if key not in set(solution.null_keys)])


@pytest.mark.slow
@pytest.mark.parametrize('noise_std', [2e-3, 2e-7])
def test_grid_reconstruction_narrows_with_shots(noise_std):
    graph = build_cluster_state(12, 12)
    truth = sample_gaussian_model(graph, GaussianSpec(0.01, noise_std), 21)
    plan = build_plan(graph)
    biases = exact_biases(plan, graph, truth)

    spreads = []
    for seed, shots in enumerate([10 ** 4, 10 ** 5, 10 ** 6]):
        diffs = signed_errors(plan, graph, truth, biases, shots, seed)
        assert len(diffs) == 528
        # parameters sharing equations are correlated, hence 4 rather than 3
        assert abs(diffs.mean()) < 4 * diffs.std(ddof=1) / math.sqrt(len(diffs))
        spreads.append(diffs.std(ddof=1))

    assert spreads[0] > spreads[1] > spreads[2]
    assert 5 <= spreads[0] / spreads[2] <= 20


def test_smaller_noise_spread_gives_tighter_truth():
    graph = build_cluster_state(12, 12)
    wide = sample_gaussian_model(graph, GaussianSpec(0.01, 2e-3), 21)
    narrow = sample_gaussian_model(graph, GaussianSpec(0.01, 2e-7), 21)

    wide_spread = np.std([wide.error_probability(key) for key in wide.parameter_keys()])
    narrow_spread = np.std([narrow.error_probability(key) for key in narrow.parameter_keys()])

    assert narrow_spread < wide_spread / 1000
    assert len(wide.parameter_keys()) == len(narrow.parameter_keys()) == 528
