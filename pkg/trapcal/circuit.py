"""
Test-round simulation backends.

`exact_trap_bias` propagates a trap stabilizer forward through the chosen CZ
ordering and multiplies in the eigenvalue of every channel that sees it.
`simulate_test_round_mc` samples Pauli errors shot by shot (vectorised over
shots as boolean frames) and reports the trap outcomes they flip. Both place
noise after its gate.
"""
import logging
import zlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

from .graphs import Edge, Graph, canonical_edge
from .noise import NoiseMode, NoiseModel, ParamKey, default_support
from .pauli import PauliOperator, conjugate_through_cz, trap_stabilizer

logger = logging.getLogger(__name__)

SupportSet = Counter

DEFAULT_BATCH_SIZE = 1 << 16


@dataclass(frozen=True)
class GateOrdering:
    sequence: Tuple[Edge, ...]
    ordering_id: str

    def __post_init__(self):
        object.__setattr__(self, 'sequence', tuple(canonical_edge(*edge) for edge in self.sequence))

    def validate(self, graph: Graph) -> None:
        if len(self.sequence) != len(graph.edges) or set(self.sequence) != set(graph.edges):
            raise ValueError('Ordering {0} is not a permutation of the graph edges'.format(self.ordering_id))

    @classmethod
    def canonical(cls, graph: Graph, ordering_id: str = 'canonical') -> 'GateOrdering':
        return cls(graph.edges, ordering_id)

    @classmethod
    def shuffled(cls, graph: Graph, rng: np.random.Generator, ordering_id: str) -> 'GateOrdering':
        permutation = rng.permutation(len(graph.edges))
        return cls(tuple(graph.edges[i] for i in permutation), ordering_id)


@dataclass
class ShotResult:
    ordering_id: str
    shots: int
    trap_outcomes: Dict[int, np.ndarray] = field(default_factory=dict)

    def failures(self, trap: int) -> int:
        return int(np.count_nonzero(self.trap_outcomes[trap] < 0))


def p_fail_from_bias(bias: float) -> float:
    if not -1.0 <= bias <= 1.0:
        raise ValueError('Trap bias {0} outside [-1, 1]'.format(bias))
    return (1.0 - bias) / 2.0


def bias_from_p_fail(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError('Failure probability {0} outside [0, 1]'.format(p))
    return 1.0 - 2.0 * p


def _propagate(graph: Graph, ordering: GateOrdering, v: int) -> Iterator[Tuple[Edge, PauliOperator]]:
    "Yields each gate together with the trap stabilizer just after it"

    ordering.validate(graph)
    graph.check_vertex(v)
    operator = trap_stabilizer(graph, v)
    for gate in ordering.sequence:
        operator = conjugate_through_cz(operator, gate)
        yield gate, operator


def propagated_stabilizer(graph: Graph, ordering: GateOrdering, v: int) -> PauliOperator:
    operator = trap_stabilizer(graph, v)
    for _, operator in _propagate(graph, ordering, v):
        pass
    return operator


def support_set(graph: Graph, ordering: GateOrdering, v: int, mode: NoiseMode,
                support: Optional[Mapping[Edge, FrozenSet[int]]] = None) -> SupportSet:
    """
    Parameter keys whose eigenvalues enter the trap bias at `v`, with multiplicity.
    """
    if support is None:
        support = default_support(graph)

    keys: SupportSet = Counter()
    for gate, operator in _propagate(graph, ordering, v):
        nu = support[gate]
        if mode is NoiseMode.PER_QUBIT:
            for u in nu:
                if operator.has_support(u):
                    keys[(gate, u)] += 1
        elif any(operator.has_support(u) for u in nu):
            keys[gate] += 1
    return keys


def exact_trap_bias(graph: Graph, ordering: GateOrdering, noise: NoiseModel, v: int) -> float:
    bias = 1.0
    for key, multiplicity in support_set(graph, ordering, v, noise.mode, noise.support).items():
        bias *= noise.lam(key) ** multiplicity
    return bias


def stream_key(ordering_id: str) -> int:
    return zlib.crc32(ordering_id.encode('utf-8'))


def sample_error_frames(graph: Graph, ordering: GateOrdering, noise: NoiseModel, shots: int,
                        rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Accumulated Pauli error after the whole circuit, one column per shot.

    Returns boolean arrays (x, z) of shape (vertex_count, shots). Each gate
    first conjugates the frame, then every channel in its support injects X,
    Y or Z with probability p/3 each.
    """
    x = np.zeros((graph.vertex_count, shots), dtype=bool)
    z = np.zeros((graph.vertex_count, shots), dtype=bool)

    for gate in ordering.sequence:
        a, b = gate
        z[b] ^= x[a]
        z[a] ^= x[b]
        for u, p in noise.channels(gate):
            if p <= 0.0:
                continue
            draws = rng.random(shots)
            # X below p/3, Y in [p/3, 2p/3), Z in [2p/3, p)
            x[u] ^= draws < 2.0 * p / 3.0
            z[u] ^= (draws >= p / 3.0) & (draws < p)
    return x, z


def simulate_test_round_mc(graph: Graph, ordering: GateOrdering, noise: NoiseModel, traps: Iterable[int],
                           shots: int, seed: int, batch_size: int = DEFAULT_BATCH_SIZE) -> ShotResult:
    """
    Monte Carlo test rounds with the given traps.

    Shots run in fixed-size batches; batch i draws from the stream
    (seed, crc32(ordering_id), i), so results do not depend on how batches
    are scheduled.
    """
    traps = sorted(set(traps))
    ordering.validate(graph)
    for v in traps:
        graph.check_vertex(v)
    if not graph.is_independent(traps):
        raise ValueError('Traps {0} are not an independent set'.format(traps))
    if shots < 1:
        raise ValueError('Number of shots must be positive, got {0}'.format(shots))
    if noise.mode is not NoiseMode.PER_QUBIT:
        raise ValueError('Monte Carlo sampling needs a per_qubit noise model')

    key = stream_key(ordering.ordering_id)
    outcomes = {v: np.empty(shots, dtype=np.int8) for v in traps}

    for batch_index, start in enumerate(range(0, shots, batch_size)):
        size = min(batch_size, shots - start)
        rng = np.random.default_rng([seed, key, batch_index])
        _, z = sample_error_frames(graph, ordering, noise, size, rng)
        for v in traps:
            outcomes[v][start:start + size] = np.where(z[v], -1, 1)

    logger.debug('Simulated %d shots of ordering %s with %d traps', shots, ordering.ordering_id, len(traps))
    return ShotResult(ordering.ordering_id, shots, outcomes)
