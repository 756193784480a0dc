import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import yaml
from jinja2 import Environment, FileSystemLoader

from .circuit import GateOrdering, exact_trap_bias, simulate_test_round_mc
from .config import PROTOCOL, ExperimentSpec, NoiseSpec, load_document
from .estimator import (DesignMatrix, EstimateReport, InsufficientSignalError, TrapStatistic, bootstrap_stderr,
                        build_design_matrix, design_matrix_from_biases, empirical_bias, error_report, exact_biases,
                        ratio_estimate, solve_log_least_squares, true_parameters)
from .graphs import Graph, VertexColoring, greedy_color, largest_first_order
from .mbqc import MeasurementPattern
from .noise import (NoiseMode, NoiseModel, crosstalk_model, default_support, faulty_gate_model, lambda_from_p,
                    parameter_keys, sample_gaussian_model, uniform_model)
from .planner import OrderingPlan, build_plan
from .protocol import ProtocolOutcome, ZAttack, run_rvbqc, run_rvbqc_tcp
from .serialization import (deserialize_graph, deserialize_noise, deserialize_pattern, serialize_float,
                            serialize_noise, serialize_plan, serialize_round_records, write_estimates,
                            write_histogram, write_json, write_trap_statistics)

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS = {
    'bootstrap_resamples': 200,
    'histogram_bins': 40,
    'float_digits': 9,
}


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def build_noise_model(spec: NoiseSpec, graph: Graph, seed: int) -> NoiseModel:
    if spec.kind == 'uniform':
        if not spec.support:
            return uniform_model(graph, spec.p, spec.mode)
        if spec.mode is not NoiseMode.PER_QUBIT:
            raise ValueError('Cross-talk support needs per_qubit noise')
        lam = lambda_from_p(spec.p)
        support = default_support(graph)
        for edge, qubits in spec.support.items():
            support[edge] = frozenset(qubits) | frozenset(edge)
        lambdas = {key: lam for key in parameter_keys(NoiseMode.PER_QUBIT, support)}
        return crosstalk_model(graph, {edge: support[edge] for edge in spec.support}, lambdas)
    if spec.kind == 'gaussian':
        return sample_gaussian_model(graph, spec.gaussian, seed)
    if spec.kind == 'file':
        return deserialize_noise(load_document(spec.path), graph)
    if spec.kind == 'entries':
        return deserialize_noise(spec.document, graph)
    if spec.kind == 'faulty_edge':
        return faulty_gate_model(graph, spec.faulty_edge, spec.faulty_p)
    raise ValueError('Unknown noise kind: {0}'.format(spec.kind))


def plan_for(graph: Graph, param_mode: NoiseMode, truth: NoiseModel) -> OrderingPlan:
    if param_mode is NoiseMode.PER_QUBIT:
        if truth.mode is not NoiseMode.PER_QUBIT:
            raise ValueError('Per-qubit estimation needs a per_qubit noise model')
        return build_plan(graph, param_mode, truth.support)
    return build_plan(graph, param_mode)


def default_coloring(graph: Graph) -> VertexColoring:
    return greedy_color(graph, largest_first_order(graph))


def calibrate(graph: Graph, plan: OrderingPlan, noise: NoiseModel, coloring: VertexColoring, shots: int,
              seed: int) -> List[TrapStatistic]:
    "Test rounds of every color class under every plan ordering, `shots` each"

    stats = []
    for ordering in plan.orderings:
        for color, traps in enumerate(coloring.classes()):
            result = simulate_test_round_mc(graph, ordering, noise, traps, shots, derive_seed(seed, color))
            stats.extend(TrapStatistic(ordering.ordering_id, v, shots, result.failures(v)) for v in traps)
        logger.debug('Calibrated ordering %s', ordering.ordering_id)
    logger.info('Simulated %d shots for each of %d orderings and %d test types',
                shots, len(plan.orderings), coloring.k)
    return sorted(stats, key=lambda stat: stat.key)


@dataclass
class RunSummary:
    tag: str
    shots: Optional[int]
    noise_std: Optional[float]
    report: EstimateReport
    null_keys: List = field(default_factory=list)
    unidentifiable: List = field(default_factory=list)

    def overview(self) -> Dict[str, Any]:
        overview = {'tag': self.tag, 'shots_per_bin': self.shots, 'noise_std': self.noise_std}
        overview.update(self.report.summary())
        overview['unidentified'] = len(self.null_keys) + len(self.unidentifiable)
        return overview


@dataclass
class ComparisonResult:
    trap: int
    with_id: str
    without_id: str
    bias_with: float
    bias_without: float
    ratio: Optional[float]

    def overview(self) -> Dict[str, Any]:
        return {
            'trap': self.trap,
            'with': self.with_id,
            'without': self.without_id,
            'bias_with': self.bias_with,
            'bias_without': self.bias_without,
            'ratio': self.ratio,
        }


@dataclass
class ExperimentResult:
    name: str
    title: Optional[str]
    output_directory: Path
    plan_stats: Dict[str, int]
    runs: List[RunSummary] = field(default_factory=list)
    comparisons: List[ComparisonResult] = field(default_factory=list)
    protocol: Optional[ProtocolOutcome] = None

    def overview(self) -> Dict[str, Any]:
        overview: Dict[str, Any] = {
            'name': self.name,
            'title': self.title,
            'plan': dict(self.plan_stats),
            'runs': [run.overview() for run in self.runs],
        }
        if self.comparisons:
            overview['comparisons'] = [c.overview() for c in self.comparisons]
        if self.protocol is not None:
            overview['protocol'] = {
                'verdict': self.protocol.verdict,
                'result': self.protocol.result,
                'failed_tests': self.protocol.failed_tests,
                'test_rounds': self.protocol.test_rounds,
            }
        return overview


def estimate(plan: OrderingPlan, graph: Graph, truth: Optional[NoiseModel], matrix: DesignMatrix,
             resamples: int, seed: int) -> Tuple[EstimateReport, List]:
    solution = solve_log_least_squares(matrix)
    null_keys = set(solution.null_keys)
    estimates = {key: value for key, value in solution.lambdas.items() if key not in null_keys}
    stderr = bootstrap_stderr(matrix, resamples, seed)
    truth_params = true_parameters(plan, graph, truth) if truth is not None else None
    report = error_report(estimates, truth_params, matrix.rows_per_key(), stderr, solution.residual_norm,
                          int(matrix.shots.sum()), matrix.dropped_rows)
    return report, solution.null_keys


def run_comparisons(spec: ExperimentSpec, graph: Graph, truth: NoiseModel) -> List[ComparisonResult]:
    orderings = {}
    for name, sequence in spec.orderings.items():
        ordering = GateOrdering(sequence, name)
        ordering.validate(graph)
        orderings[name] = ordering

    def bias(ordering_id: str, trap: int) -> float:
        ordering = orderings[ordering_id]
        if spec.exact_bias:
            return exact_trap_bias(graph, ordering, truth, trap)
        shots = spec.shots[0]
        result = simulate_test_round_mc(graph, ordering, truth, [trap], shots, spec.seed)
        return empirical_bias(TrapStatistic(ordering_id, trap, shots, result.failures(trap)))

    results = []
    for comparison in spec.comparisons:
        graph.check_vertex(comparison.trap)
        bias_with = bias(comparison.with_id, comparison.trap)
        bias_without = bias(comparison.without_id, comparison.trap)
        try:
            ratio = ratio_estimate(bias_with, bias_without)
        except InsufficientSignalError as e:
            logger.warning('No ratio for trap %s: %s', graph.label(comparison.trap), e)
            ratio = None
        results.append(ComparisonResult(comparison.trap, comparison.with_id, comparison.without_id,
                                        bias_with, bias_without, ratio))
    return results


def load_pattern(spec: ExperimentSpec, graph: Graph, base_directory: Path) -> MeasurementPattern:
    "The computation delegated in protocol mode; every qubit measured at angle 0 unless a pattern is given"

    if not spec.pattern:
        return MeasurementPattern(graph, {v: 0 for v in graph.vertices}, {}, frozenset(), frozenset(graph.vertices))
    pattern = deserialize_pattern(spec.pattern, base_directory)
    if pattern.graph.edges != graph.edges or pattern.graph.vertex_count != graph.vertex_count:
        raise ValueError('Pattern graph does not match the experiment graph')
    return pattern


def run_experiment(spec: ExperimentSpec, output_directory: Path, settings: Optional[Mapping[str, Any]] = None,
                   data_directory: Optional[Path] = None, attack: Optional[ZAttack] = None,
                   address: Optional[str] = None) -> ExperimentResult:
    """
    Runs every noise spread of `spec` and writes its result files. In protocol
    mode `address` switches from the in-process channel to local TCP.
    """
    settings = dict(DEFAULT_SETTINGS, **(settings or {}))
    resamples = int(spec.bootstrap_resamples or settings['bootstrap_resamples'])
    bins = int(spec.histogram_bins or settings['histogram_bins'])
    digits = int(settings['float_digits'])
    base = Path(data_directory) if data_directory is not None else Path('.')
    output_directory = Path(output_directory)
    output_directory.mkdir(parents=True, exist_ok=True)

    logger.info('Running experiment "%s" (%s)...', spec.name, spec.mode)

    graph = deserialize_graph(spec.graph, base)
    pattern = load_pattern(spec, graph, base) if spec.mode == PROTOCOL else None

    result: Optional[ExperimentResult] = None

    for std in spec.spreads:
        noise_spec = spec.noise if std is None else spec.noise.with_std(std)
        truth = build_noise_model(noise_spec, graph, spec.seed)
        plan = plan_for(graph, spec.param_mode, truth)
        suffix = '' if std is None else '_std{0}'.format(serialize_float(std, 3))

        if result is None:
            result = ExperimentResult(spec.name, spec.title, output_directory, plan.stats())
            if spec.comparisons:
                result.comparisons = run_comparisons(spec, graph, truth)

        write_json(output_directory / 'noise{0}.json'.format(suffix), serialize_noise(truth))
        write_json(output_directory / 'plan{0}.json'.format(suffix), serialize_plan(plan))

        matrices: List[Tuple[str, Optional[int], DesignMatrix]] = []

        if spec.mode == PROTOCOL:
            if address is None:
                protocol = run_rvbqc(spec.protocol, pattern, default_coloring(graph), plan, truth, attack)
            else:
                protocol = run_rvbqc_tcp(spec.protocol, pattern, default_coloring(graph), plan, truth, address,
                                         attack)
            result.protocol = protocol.outcome
            with open(output_directory / 'records{0}.yaml'.format(suffix), 'w') as fh:
                yaml.dump({'records': serialize_round_records(protocol.client, protocol.server)}, stream=fh)
            stats = protocol.statistics
            write_trap_statistics(output_directory / 'stats_protocol{0}.csv'.format(suffix), stats)
            if stats:
                matrices.append(('protocol', None, build_design_matrix(plan, stats, graph)))

        elif spec.exact_bias:
            biases = exact_biases(plan, graph, truth)
            matrices.append(('exact', None, design_matrix_from_biases(plan, biases, graph)))

        else:
            coloring = default_coloring(graph)
            for budget in spec.shots:
                stats = calibrate(graph, plan, truth, coloring, budget, derive_seed(spec.seed, budget))
                write_trap_statistics(output_directory / 'stats_shots{0}{1}.csv'.format(budget, suffix), stats)
                matrices.append(('shots{0}'.format(budget), budget, build_design_matrix(plan, stats, graph)))

        for tag, budget, matrix in matrices:
            try:
                report, null_keys = estimate(plan, graph, truth, matrix, resamples, spec.seed)
            except InsufficientSignalError as e:
                logger.warning('No estimate for %s: %s', tag, e)
                continue
            write_estimates(output_directory / 'estimates_{0}{1}.csv'.format(tag, suffix), report, digits)
            write_histogram(output_directory / 'histogram_{0}{1}.csv'.format(tag, suffix),
                            report.histogram(bins), budget or report.shots, std, digits)
            result.runs.append(RunSummary(tag, budget, std, report, null_keys, plan.unidentifiable))

    with (output_directory / 'report.yaml').open('w') as report_file:
        yaml.dump({'overview': result.overview()}, stream=report_file)

    logger.info('Experiment information has been written to: %s', output_directory)

    if spec.template:
        # templates are looked up relative to the workspace directory
        render_template(base, spec.template, {
            'name': spec.name,
            'title': spec.title,
            'overview': result.overview(),
            'runs': result.runs,
            'comparisons': result.comparisons,
        }, output_directory / ('report' + Path(spec.template).suffix))

    return result


def render_template(search_directory: Path, template_path: str, context: Mapping[str, Any],
                    output_path: Path) -> None:
    env = Environment(loader=FileSystemLoader(str(search_directory)))
    env.globals['float'] = float
    env.globals['str'] = str
    env.globals['format_float'] = serialize_float
    rendered = env.get_template(template_path).render(context)

    with open(output_path, 'w') as fh:
        fh.write(rendered)

    logger.info("Rendered template to '%s'.", output_path.name)
