"""
From trap statistics to depolarizing eigenvalues.

Every (ordering, trap) bias is a product of eigenvalues, so its logarithm is a
linear combination of log-eigenvalues with the support-set multiplicities as
coefficients. Stacking one row per statistic gives an overdetermined system
that is solved in the least-squares sense.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .circuit import exact_trap_bias, support_set
from .graphs import Graph
from .noise import NoiseMode, NoiseModel, ParamKey, parameter_keys
from .planner import EquationKind, OrderingPlan

logger = logging.getLogger(__name__)

BIAS_FLOOR = 1e-6
NULL_TOLERANCE = 1e-9

RowKey = Tuple[str, int]


class InsufficientSignalError(ValueError):
    pass


@dataclass(frozen=True)
class TrapStatistic:
    ordering_id: str
    trap: int
    shots: int
    failures: int

    def __post_init__(self):
        if self.shots < 0 or self.failures < 0:
            raise ValueError('Negative counts in statistic for {0}'.format(self.key))
        if self.failures > self.shots:
            raise ValueError('More failures ({0}) than shots ({1}) for {2}'.format(
                self.failures, self.shots, self.key))

    @property
    def key(self) -> RowKey:
        return (self.ordering_id, self.trap)

    def merge(self, other: 'TrapStatistic') -> 'TrapStatistic':
        if other.key != self.key:
            raise ValueError('Cannot merge statistics of {0} and {1}'.format(self.key, other.key))
        return TrapStatistic(self.ordering_id, self.trap, self.shots + other.shots, self.failures + other.failures)


def empirical_bias(stat: TrapStatistic) -> float:
    if stat.shots < 1:
        raise ValueError('Statistic for {0} has no shots'.format(stat.key))
    return 1.0 - 2.0 * stat.failures / stat.shots


def ratio_estimate(bias_with: float, bias_without: float) -> float:
    if bias_without <= 0.0:
        raise InsufficientSignalError('Reference bias {0} is not positive'.format(bias_without))
    return bias_with / bias_without


def merge_statistics(stats: Iterable[TrapStatistic]) -> List[TrapStatistic]:
    merged: Dict[RowKey, TrapStatistic] = {}
    for stat in stats:
        merged[stat.key] = merged[stat.key].merge(stat) if stat.key in merged else stat
    return [merged[key] for key in sorted(merged)]


def biases_from_statistics(stats: Iterable[TrapStatistic]) -> Dict[RowKey, float]:
    return {stat.key: empirical_bias(stat) for stat in stats if stat.shots > 0}


def exact_biases(plan: OrderingPlan, graph: Graph, noise: NoiseModel,
                 traps: Optional[Iterable[int]] = None) -> Dict[RowKey, float]:
    "Infinite-shot biases for every plan ordering and trap"

    traps = list(graph.vertices) if traps is None else list(traps)
    return {(o.ordering_id, v): exact_trap_bias(graph, o, noise, v) for o in plan.orderings for v in traps}


@dataclass
class DesignMatrix:
    keys: List[ParamKey]
    rows: List[RowKey]
    matrix: np.ndarray
    rhs: np.ndarray
    shots: np.ndarray
    failures: np.ndarray
    dropped_rows: int = 0
    unidentifiable: List[ParamKey] = field(default_factory=list)

    @property
    def has_counts(self) -> bool:
        return bool(len(self.shots)) and bool(np.all(self.shots > 0))

    def rows_per_key(self) -> Dict[ParamKey, int]:
        counts = np.count_nonzero(self.matrix, axis=0) if len(self.rows) else np.zeros(len(self.keys), dtype=int)
        return {key: int(c) for key, c in zip(self.keys, counts)}


def _log_bias(bias: np.ndarray) -> np.ndarray:
    return np.log(np.clip(bias, BIAS_FLOOR, 1.0))


def _assemble(plan: OrderingPlan, graph: Graph, entries: Sequence[Tuple[RowKey, float, int, int]]) -> DesignMatrix:
    known = set(plan.ordering_ids)
    all_keys = parameter_keys(plan.mode, plan.support)
    column = {key: i for i, key in enumerate(all_keys)}

    rows: List[RowKey] = []
    coefficients: List[np.ndarray] = []
    biases: List[float] = []
    shots: List[int] = []
    failures: List[int] = []
    dropped = 0

    for row_key, bias, n, k in entries:
        ordering_id, trap = row_key
        if ordering_id not in known:
            raise ValueError('Statistic refers to unknown ordering {0}'.format(ordering_id))
        if bias <= 0.0:
            dropped += 1
            continue

        keys = support_set(graph, plan.ordering(ordering_id), trap, plan.mode, plan.support)
        row = np.zeros(len(all_keys))
        for key, multiplicity in keys.items():
            row[column[key]] = multiplicity
        if not row.any():
            continue

        rows.append(row_key)
        coefficients.append(row)
        biases.append(bias)
        shots.append(n)
        failures.append(k)

    if dropped:
        logger.warning('Dropped %d rows with non-positive bias', dropped)

    matrix = np.array(coefficients).reshape(len(rows), len(all_keys))
    supported = matrix.any(axis=0) if len(rows) else np.zeros(len(all_keys), dtype=bool)
    unidentifiable = [key for key, ok in zip(all_keys, supported) if not ok]
    if unidentifiable:
        logger.warning('%d parameters appear in no row and are removed', len(unidentifiable))

    return DesignMatrix(
        keys=[key for key, ok in zip(all_keys, supported) if ok],
        rows=rows,
        matrix=matrix[:, supported],
        rhs=_log_bias(np.array(biases, dtype=float)),
        shots=np.array(shots, dtype=np.int64),
        failures=np.array(failures, dtype=np.int64),
        dropped_rows=dropped,
        unidentifiable=unidentifiable,
    )


def build_design_matrix(plan: OrderingPlan, stats: Iterable[TrapStatistic], graph: Graph,
                        mode: Optional[NoiseMode] = None) -> DesignMatrix:
    if mode is not None and mode is not plan.mode:
        raise ValueError('Plan was built for {0}, not {1}'.format(plan.mode.value, mode.value))

    entries = []
    for stat in merge_statistics(stats):
        if stat.shots < 1:
            raise ValueError('Statistic for {0} has no shots'.format(stat.key))
        entries.append((stat.key, empirical_bias(stat), stat.shots, stat.failures))
    return _assemble(plan, graph, entries)


def design_matrix_from_biases(plan: OrderingPlan, biases: Mapping[RowKey, float], graph: Graph) -> DesignMatrix:
    return _assemble(plan, graph, [(key, biases[key], 0, 0) for key in sorted(biases)])


@dataclass
class LeastSquaresSolution:
    keys: List[ParamKey]
    lambdas: Dict[ParamKey, float]
    residual_norm: float
    rank: int
    null_keys: List[ParamKey] = field(default_factory=list)


def _null_keys(matrix: DesignMatrix) -> Tuple[int, List[ParamKey]]:
    null = scipy.linalg.null_space(matrix.matrix)
    rank = matrix.matrix.shape[1] - null.shape[1]
    if not null.shape[1]:
        return rank, []
    affected = np.abs(null).max(axis=1) > NULL_TOLERANCE
    return rank, [key for key, hit in zip(matrix.keys, affected) if hit]


def solve_log_least_squares(matrix: DesignMatrix) -> LeastSquaresSolution:
    """
    Minimizes |A x - ln P| over x = ln(lambda). A rank-deficient system is
    solved with the minimum-norm solution and the parameters touched by its
    null space are reported.
    """
    if not matrix.rows or not matrix.keys:
        raise InsufficientSignalError('Design matrix has no usable rows')

    x, _, _, _ = scipy.linalg.lstsq(matrix.matrix, matrix.rhs)
    residual = float(np.linalg.norm(matrix.matrix @ x - matrix.rhs))
    rank, null_keys = _null_keys(matrix)
    if null_keys:
        logger.warning('Design matrix has rank %d < %d; %d parameters share a null space',
                       rank, len(matrix.keys), len(null_keys))

    lambdas = {key: float(math.exp(value)) for key, value in zip(matrix.keys, x)}
    return LeastSquaresSolution(list(matrix.keys), lambdas, residual, rank, null_keys)


def bootstrap_stderr(matrix: DesignMatrix, resamples: int = 200, seed: int = 0) -> Dict[ParamKey, float]:
    """
    Standard error of every estimate over binomial resamples of the row counts.

    Matrices without shot counts (exact biases) have zero error.
    """
    if resamples < 2:
        raise ValueError('Need at least two bootstrap resamples, got {0}'.format(resamples))
    if not matrix.has_counts:
        return {key: 0.0 for key in matrix.keys}

    pinv = scipy.linalg.pinv(matrix.matrix)
    rng = np.random.default_rng([seed, resamples])
    p_fail = matrix.failures / matrix.shots

    estimates = np.empty((resamples, len(matrix.keys)))
    for i in range(resamples):
        failures = rng.binomial(matrix.shots, p_fail)
        rhs = _log_bias(1.0 - 2.0 * failures / matrix.shots)
        estimates[i] = np.exp(pinv @ rhs)

    std = estimates.std(axis=0, ddof=1)
    return {key: float(s) for key, s in zip(matrix.keys, std)}


def estimate_from_equations(plan: OrderingPlan, biases: Mapping[RowKey, float]) -> Dict[ParamKey, float]:
    "Averages every plan equation whose biases are available"

    values: Dict[ParamKey, List[float]] = {}
    for eq in plan.equations:
        with_key = (eq.with_id, eq.trap)
        if with_key not in biases:
            continue
        if eq.kind is EquationKind.ABSOLUTE:
            values.setdefault(eq.param, []).append(biases[with_key])
            continue
        without_key = (eq.without_id, eq.trap)
        if without_key not in biases:
            continue
        try:
            values.setdefault(eq.param, []).append(ratio_estimate(biases[with_key], biases[without_key]))
        except InsufficientSignalError as e:
            logger.warning('Skipping equation at trap %d (%s): %s', eq.trap, eq.with_id, e)

    return {key: float(np.mean(estimates)) for key, estimates in values.items() if estimates}


def true_parameters(plan: OrderingPlan, graph: Graph, truth: NoiseModel) -> Dict[ParamKey, float]:
    """
    Ground truth on the plan's parameter space.

    Same-mode truth is returned as is. Edge-level parameters against a
    per-qubit truth are defined by the exact bias ratio of the first equation
    isolating them; edges without one fall back to the product of their
    endpoint eigenvalues.
    """
    keys = parameter_keys(plan.mode, plan.support)
    if plan.mode is truth.mode:
        missing = [key for key in keys if key not in truth.lambdas]
        if missing:
            raise ValueError('Truth model lacks {0} plan parameters'.format(len(missing)))
        return {key: truth.lam(key) for key in keys}

    if plan.mode is not NoiseMode.PER_EDGE:
        raise ValueError('Per-qubit parameters cannot be derived from an edge-level truth model')

    result = {}
    for key in keys:
        equations = plan.equations_for(key)
        if not equations:
            result[key] = truth.effective_edge_lambda(key)
            continue
        eq = equations[0]
        value = exact_trap_bias(graph, plan.ordering(eq.with_id), truth, eq.trap)
        if eq.kind is EquationKind.RATIO:
            value = ratio_estimate(value, exact_trap_bias(graph, plan.ordering(eq.without_id), truth, eq.trap))
        result[key] = value
    return result


@dataclass(frozen=True)
class ParameterEstimate:
    key: ParamKey
    lambda_hat: float
    lambda_true: Optional[float] = None
    rows: int = 0
    stderr: Optional[float] = None

    @property
    def diff(self) -> Optional[float]:
        if self.lambda_true is None:
            return None
        return self.lambda_hat - self.lambda_true

    @property
    def abs_diff_x100(self) -> Optional[float]:
        if self.lambda_true is None:
            return None
        return 100.0 * abs(self.lambda_hat - self.lambda_true)


@dataclass(frozen=True)
class HistogramBin:
    left: float
    right: float
    count: int


@dataclass
class EstimateReport:
    entries: List[ParameterEstimate]
    residual_norm: float = 0.0
    shots: int = 0
    dropped_rows: int = 0

    @property
    def diffs(self) -> np.ndarray:
        return np.array([e.diff for e in self.entries if e.diff is not None], dtype=float)

    def summary(self) -> Dict[str, float]:
        diffs = self.diffs
        return {
            'parameters': len(self.entries),
            'mean_diff': float(diffs.mean()) if len(diffs) else float('nan'),
            'std_diff': float(diffs.std(ddof=1)) if len(diffs) > 1 else float('nan'),
            'max_abs_diff_x100': float(100.0 * np.abs(diffs).max()) if len(diffs) else float('nan'),
            'residual_norm': self.residual_norm,
            'shots': self.shots,
            'dropped_rows': self.dropped_rows,
        }

    def histogram(self, bins: int = 40) -> List[HistogramBin]:
        return histogram(self.diffs, bins)


def histogram(values: Sequence[float], bins: int = 40) -> List[HistogramBin]:
    if bins < 1:
        raise ValueError('Number of histogram bins must be positive, got {0}'.format(bins))
    values = np.asarray(values, dtype=float)
    if not len(values):
        return []
    counts, edges = np.histogram(values, bins=bins)
    return [HistogramBin(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def error_report(estimates: Mapping[ParamKey, float], truth: Optional[Mapping[ParamKey, float]] = None,
                 rows: Optional[Mapping[ParamKey, int]] = None, stderr: Optional[Mapping[ParamKey, float]] = None,
                 residual_norm: float = 0.0, shots: int = 0, dropped_rows: int = 0) -> EstimateReport:
    if truth is not None:
        missing = set(estimates) - set(truth)
        if missing:
            raise ValueError('No ground truth for {0} estimated parameters'.format(len(missing)))

    entries = []
    for key in sorted(estimates):
        entries.append(ParameterEstimate(
            key=key,
            lambda_hat=estimates[key],
            lambda_true=truth[key] if truth is not None else None,
            rows=rows.get(key, 0) if rows is not None else 0,
            stderr=stderr.get(key) if stderr is not None else None,
        ))
    return EstimateReport(entries, residual_norm, shots, dropped_rows)
