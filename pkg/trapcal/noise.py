import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from .graphs import Edge, Graph, canonical_edge

logger = logging.getLogger(__name__)

QubitKey = Tuple[Edge, int]
ParamKey = Union[QubitKey, Edge]


class NoiseMode(Enum):
    PER_QUBIT = 'per_qubit'
    PER_EDGE = 'per_edge'


def is_qubit_key(key: ParamKey) -> bool:
    return isinstance(key[0], tuple)


def format_key(key: ParamKey, graph: Optional[Graph] = None) -> str:
    if is_qubit_key(key):
        edge, qubit = key
        if graph is None:
            return '{0}@{1}'.format(edge, qubit)
        return '{0}@{1}'.format(graph.edge_label(edge), graph.label(qubit))
    if graph is None:
        return str(key)
    return graph.edge_label(key)


def lambda_from_p(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError('Error probability {0} outside [0, 1]'.format(p))
    return 1.0 - 4.0 * p / 3.0


def p_from_lambda(lam: float) -> float:
    if not -1.0 / 3.0 - 1e-12 <= lam <= 1.0:
        raise ValueError('Depolarizing eigenvalue {0} outside [-1/3, 1]'.format(lam))
    return min(1.0, max(0.0, 3.0 * (1.0 - lam) / 4.0))


@dataclass(frozen=True)
class GaussianSpec:
    mean: float
    std: float

    def __post_init__(self):
        if not 0.0 <= self.mean <= 1.0:
            raise ValueError('Gaussian mean {0} is not a probability'.format(self.mean))
        if self.std < 0:
            raise ValueError('Gaussian std must be non-negative, got {0}'.format(self.std))


@dataclass(frozen=True)
class NoiseModel:
    """
    Depolarizing channels applied after each CZ.

    In per_qubit mode `lambdas` is keyed by (edge, qubit) for every qubit of
    the edge's support nu(e); in per_edge mode by the edge alone. `support`
    is always populated (endpoints when no cross-talk is declared).
    """
    mode: NoiseMode
    support: Mapping[Edge, FrozenSet[int]]
    lambdas: Mapping[ParamKey, float]
    probs: Optional[Mapping[ParamKey, float]] = None
    seed: Optional[int] = None
    gaussian: Optional[GaussianSpec] = None
    _channels: Dict[Edge, Tuple[Tuple[int, float], ...]] = field(default_factory=dict, init=False, repr=False,
                                                                 compare=False)

    def __post_init__(self):
        for edge, nu in self.support.items():
            if not set(edge) <= set(nu):
                raise ValueError('Support of {0} must contain both endpoints, got {1}'.format(edge, sorted(nu)))

        expected = set(parameter_keys(self.mode, self.support))
        if set(self.lambdas) != expected:
            missing = sorted(expected - set(self.lambdas), key=str)
            extra = sorted(set(self.lambdas) - expected, key=str)
            raise ValueError('Noise parameters do not match support (missing {0}, unexpected {1})'.format(
                missing[:5], extra[:5]))

        for key, lam in self.lambdas.items():
            if not -1.0 / 3.0 - 1e-12 <= lam <= 1.0:
                raise ValueError('Eigenvalue {0} for {1} outside [-1/3, 1]'.format(lam, key))

        if self.probs is not None and set(self.probs) != expected:
            raise ValueError('Error probabilities do not match the noise parameters')

    def parameter_keys(self) -> List[ParamKey]:
        return parameter_keys(self.mode, self.support)

    def lam(self, key: ParamKey) -> float:
        return self.lambdas[key]

    def error_probability(self, key: ParamKey) -> float:
        if self.probs is not None:
            return self.probs[key]
        return p_from_lambda(self.lambdas[key])

    def channels(self, edge: Edge) -> Tuple[Tuple[int, float], ...]:
        "(qubit, error probability) for each depolarizing channel following CZ on `edge`"

        if self.mode is not NoiseMode.PER_QUBIT:
            raise ValueError('Physical channels are only defined for per_qubit noise models')
        cached = self._channels.get(edge)
        if cached is None:
            cached = tuple((u, self.error_probability((edge, u))) for u in sorted(self.support[edge]))
            self._channels[edge] = cached
        return cached

    @property
    def is_noiseless(self) -> bool:
        return all(lam == 1.0 for lam in self.lambdas.values())

    def effective_edge_lambda(self, edge: Edge) -> float:
        "Closed-form diagnostic product of the endpoint eigenvalues"

        if self.mode is NoiseMode.PER_EDGE:
            return self.lambdas[edge]
        u, v = edge
        return self.lambdas[(edge, u)] * self.lambdas[(edge, v)]


def parameter_keys(mode: NoiseMode, support: Mapping[Edge, FrozenSet[int]]) -> List[ParamKey]:
    if mode is NoiseMode.PER_EDGE:
        return sorted(support)
    return [(edge, u) for edge in sorted(support) for u in sorted(support[edge])]


def default_support(graph: Graph) -> Dict[Edge, FrozenSet[int]]:
    return {edge: frozenset(edge) for edge in graph.edges}


def _model_from_probs(graph: Graph, probs: Dict[ParamKey, float], mode: NoiseMode,
                      support=None, **kwargs) -> NoiseModel:
    return NoiseModel(
        mode=mode,
        support=support or default_support(graph),
        lambdas={key: lambda_from_p(p) for key, p in probs.items()},
        probs=probs,
        **kwargs
    )


def noiseless_model(graph: Graph, mode: NoiseMode = NoiseMode.PER_QUBIT) -> NoiseModel:
    return uniform_model(graph, 0.0, mode)


def uniform_model(graph: Graph, p: float, mode: NoiseMode = NoiseMode.PER_QUBIT) -> NoiseModel:
    lambda_from_p(p)
    support = default_support(graph)
    probs = {key: p for key in parameter_keys(mode, support)}
    return _model_from_probs(graph, probs, mode, support)


def sample_gaussian_model(graph: Graph, spec: GaussianSpec, seed: int) -> NoiseModel:
    """
    One independent draw per (edge, endpoint) from N(mean, std^2), clamped to [0, 1].
    """
    rng = np.random.default_rng(seed)
    support = default_support(graph)
    keys = parameter_keys(NoiseMode.PER_QUBIT, support)
    draws = rng.normal(spec.mean, spec.std, size=len(keys)) if spec.std > 0 else np.full(len(keys), spec.mean)
    clamped = np.clip(draws, 0.0, 1.0)

    num_clamped = int(np.count_nonzero(draws != clamped))
    if num_clamped:
        logger.warning('Clamped %d of %d sampled error probabilities to [0, 1]', num_clamped, len(keys))

    probs = {key: float(p) for key, p in zip(keys, clamped)}
    return _model_from_probs(graph, probs, NoiseMode.PER_QUBIT, support, seed=seed, gaussian=spec)


def crosstalk_model(graph: Graph, support: Mapping[Edge, Iterable[int]],
                    lambdas: Mapping[QubitKey, float]) -> NoiseModel:
    """
    Per-qubit model whose gates may also noise qubits they do not touch.

    Edges missing from `support` default to their endpoints. Every declared
    (edge, qubit) pair needs an eigenvalue.
    """
    full_support = default_support(graph)
    for edge, qubits in support.items():
        edge = canonical_edge(*edge)
        if edge not in full_support:
            raise ValueError('Support declared for unknown edge {0}'.format(edge))
        nu = frozenset(qubits)
        if not set(edge) <= nu:
            raise ValueError('Support of {0} is missing an endpoint: {1}'.format(edge, sorted(nu)))
        for u in nu:
            graph.check_vertex(u)
        full_support[edge] = nu

    normalized = {(canonical_edge(*edge), int(u)): float(lam) for (edge, u), lam in lambdas.items()}
    for key in parameter_keys(NoiseMode.PER_QUBIT, full_support):
        if key not in normalized:
            raise ValueError('No eigenvalue given for {0}'.format(format_key(key)))

    return NoiseModel(NoiseMode.PER_QUBIT, full_support, normalized)


def faulty_gate_model(graph: Graph, edge: Edge, p_by_qubit: Mapping[int, float]) -> NoiseModel:
    "Every CZ ideal except `edge`, which is followed by independent channels on its endpoints"

    edge = canonical_edge(*edge)
    if edge not in graph.edges:
        raise ValueError('Unknown edge {0}'.format(edge))

    probs: Dict[ParamKey, float] = {}
    for key in parameter_keys(NoiseMode.PER_QUBIT, default_support(graph)):
        gate, qubit = key
        probs[key] = float(p_by_qubit.get(qubit, 0.0)) if gate == edge else 0.0
    return _model_from_probs(graph, probs, NoiseMode.PER_QUBIT)
