"""
Measurement patterns and the dense state-vector backend.

A pattern measures every vertex of a graph state in the basis
|+_phi>, |-_phi> with |+-_phi> = (|0> +- e^{i phi}|1>)/sqrt(2); outcome 0 is
the + projection. Earlier outcomes correct later angles through the flow.
"""
import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .graphs import Graph, build_cluster_state, build_path

logger = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 16


@dataclass(frozen=True)
class Angle:
    "k * pi/4, exact mod 8"

    k: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'k', int(self.k) % 8)

    def __add__(self, other: 'Angle') -> 'Angle':
        return Angle(self.k + other.k)

    def __sub__(self, other: 'Angle') -> 'Angle':
        return Angle(self.k - other.k)

    def __neg__(self) -> 'Angle':
        return Angle(-self.k)

    def flipped(self, bit: int) -> 'Angle':
        return -self if bit else self

    def shifted(self, bit: int) -> 'Angle':
        "Adds pi when `bit` is set"
        return Angle(self.k + 4 * (bit & 1))

    @property
    def radians(self) -> float:
        return self.k * math.pi / 4

    @classmethod
    def from_radians(cls, value: float) -> 'Angle':
        k = value / (math.pi / 4)
        if abs(k - round(k)) > 1e-9:
            raise ValueError('Angle {0} is not a multiple of pi/4'.format(value))
        return cls(int(round(k)))

    @classmethod
    def random(cls, rng: np.random.Generator) -> 'Angle':
        return cls(int(rng.integers(8)))

    def __str__(self) -> str:
        return '{0}pi/4'.format(self.k)


AngleLike = Union[Angle, int]


def as_angle(value: AngleLike) -> Angle:
    return value if isinstance(value, Angle) else Angle(int(value))


def corrected_angle(phi: Angle, s_x: int, s_z: int) -> Angle:
    return phi.flipped(s_x).shifted(s_z)


@dataclass(frozen=True)
class MeasurementPattern:
    graph: Graph
    angles: Mapping[int, Angle]
    flow: Mapping[int, int]
    inputs: FrozenSet[int] = frozenset()
    outputs: FrozenSet[int] = frozenset()
    _order: Tuple[int, ...] = field(default=(), init=False, repr=False, compare=False)
    _deps: Mapping[int, Tuple[FrozenSet[int], FrozenSet[int]]] = field(default_factory=dict, init=False, repr=False,
                                                                    compare=False)

    def __post_init__(self):
        graph = self.graph
        object.__setattr__(self, 'angles', {int(v): as_angle(a) for v, a in self.angles.items()})
        object.__setattr__(self, 'inputs', frozenset(self.inputs))
        object.__setattr__(self, 'outputs', frozenset(self.outputs))

        if set(self.angles) != set(graph.vertices):
            raise ValueError('Pattern needs an angle for each of the {0} vertices'.format(graph.vertex_count))
        for v in self.inputs | self.outputs:
            graph.check_vertex(v)

        if set(self.flow) != set(graph.vertices) - self.outputs:
            raise ValueError('Flow must be defined exactly on the non-output vertices')
        if len(set(self.flow.values())) != len(self.flow):
            raise ValueError('Flow is not injective')
        for v, target in self.flow.items():
            if target in self.inputs:
                raise ValueError('Flow maps {0} onto input {1}'.format(v, target))
            if not graph.has_edge(v, target):
                raise ValueError('Flow successor {1} of {0} is not a neighbor'.format(v, target))

        object.__setattr__(self, '_deps', self._dependencies())
        object.__setattr__(self, '_order', self._topological_order())

    def _dependencies(self) -> Dict[int, Tuple[FrozenSet[int], FrozenSet[int]]]:
        x_deps: Dict[int, set] = {v: set() for v in self.graph.vertices}
        z_deps: Dict[int, set] = {v: set() for v in self.graph.vertices}
        for v, target in self.flow.items():
            x_deps[target].add(v)
            for w in self.graph.neighbors(target):
                if w != v:
                    z_deps[w].add(v)
        return {v: (frozenset(x_deps[v]), frozenset(z_deps[v])) for v in self.graph.vertices}

    def _topological_order(self) -> Tuple[int, ...]:
        waiting = {v: set(x | z) for v, (x, z) in self._deps.items()}
        dependents: Dict[int, List[int]] = {v: [] for v in self.graph.vertices}
        for v, needs in waiting.items():
            for u in needs:
                dependents[u].append(v)

        ready = [v for v, needs in waiting.items() if not needs]
        heapq.heapify(ready)
        order = []
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for w in dependents[v]:
                waiting[w].discard(v)
                if not waiting[w]:
                    heapq.heappush(ready, w)

        if len(order) != self.graph.vertex_count:
            raise ValueError('Flow dependencies are cyclic')
        return tuple(order)

    def measurement_order(self) -> Tuple[int, ...]:
        return self._order

    def signal_sets(self, v: int) -> Tuple[FrozenSet[int], FrozenSet[int]]:
        "Vertices whose outcomes enter the X and Z corrections of `v`"
        return self._deps[v]

    def signals(self, v: int, outcomes: Mapping[int, int]) -> Tuple[int, int]:
        x_deps, z_deps = self.signal_sets(v)
        s_x = 0
        for u in x_deps:
            s_x ^= outcomes[u]
        s_z = 0
        for u in z_deps:
            s_z ^= outcomes[u]
        return s_x, s_z

    @property
    def result_vertex(self) -> int:
        "The vertex whose decrypted outcome is the classical result"
        candidates = self.outputs or frozenset(self.graph.vertices)
        return min(candidates)


def _angles(count: int, angles: Optional[Sequence[AngleLike]]) -> Dict[int, Angle]:
    if angles is None:
        return {v: Angle(0) for v in range(count)}
    if len(angles) != count:
        raise ValueError('Expected {0} angles, got {1}'.format(count, len(angles)))
    return {v: as_angle(a) for v, a in enumerate(angles)}


def build_line_pattern(length: int, angles: Optional[Sequence[AngleLike]] = None) -> MeasurementPattern:
    graph = build_path(length)
    flow = {v: v + 1 for v in range(length - 1)}
    return MeasurementPattern(graph, _angles(length, angles), flow, frozenset({0}), frozenset({length - 1}))


def build_grid_pattern(width: int, height: int, angles: Optional[Sequence[AngleLike]] = None) -> MeasurementPattern:
    "Flow runs along the rows; the first column is input, the last one output"

    graph = build_cluster_state(width, height)
    flow = {}
    for row in range(height):
        for col in range(width - 1):
            v = row * width + col
            flow[v] = v + 1
    inputs = frozenset(row * width for row in range(height))
    outputs = frozenset(row * width + width - 1 for row in range(height))
    return MeasurementPattern(graph, _angles(graph.vertex_count, angles), flow, inputs, outputs)


PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)


def plus_state(angle: Angle = Angle(0)) -> np.ndarray:
    return np.array([1.0, np.exp(1j * angle.radians)], dtype=complex) / math.sqrt(2.0)


def basis_state(bit: int) -> np.ndarray:
    state = np.zeros(2, dtype=complex)
    state[bit & 1] = 1.0
    return state


class StatevectorBackend:
    """
    Dense simulator over the qubits prepared so far.

    Measured qubits are projected out, so the tensor only ever holds live
    qubits; the number of simultaneously live qubits is capped.
    """

    def __init__(self, cap: int = DEFAULT_DENSE_CAP):
        self.cap = cap
        self.state = np.ones((), dtype=complex)
        self.axes: List[int] = []

    def _axis(self, vertex: int) -> int:
        try:
            return self.axes.index(vertex)
        except ValueError:
            raise ValueError('Qubit {0} is not live'.format(vertex)) from None

    def prepare(self, vertex: int, amplitudes: np.ndarray) -> None:
        if vertex in self.axes:
            raise ValueError('Qubit {0} is already prepared'.format(vertex))
        if len(self.axes) >= self.cap:
            raise ValueError('Dense backend is limited to {0} qubits'.format(self.cap))
        self.state = np.multiply.outer(self.state, np.asarray(amplitudes, dtype=complex))
        self.axes.append(vertex)

    def apply_cz(self, u: int, v: int) -> None:
        index = [slice(None)] * len(self.axes)
        index[self._axis(u)] = 1
        index[self._axis(v)] = 1
        self.state[tuple(index)] *= -1

    def apply_pauli(self, vertex: int, kind: str) -> None:
        if kind not in ('X', 'Y', 'Z'):
            raise ValueError('Unknown Pauli {0}'.format(kind))
        axis = self._axis(vertex)
        if kind in ('X', 'Y'):
            self.state = np.flip(self.state, axis=axis)
        if kind in ('Z', 'Y'):
            index = [slice(None)] * len(self.axes)
            index[axis] = 1
            self.state[tuple(index)] *= -1

    def measure(self, vertex: int, angle: Angle, rng: np.random.Generator) -> int:
        axis = self._axis(vertex)
        zero = np.take(self.state, 0, axis=axis)
        one = np.take(self.state, 1, axis=axis)
        phase = np.exp(-1j * angle.radians)
        branches = ((zero + phase * one) / math.sqrt(2.0), (zero - phase * one) / math.sqrt(2.0))

        p_plus = float(np.vdot(branches[0], branches[0]).real)
        norm = p_plus + float(np.vdot(branches[1], branches[1]).real)
        outcome = int(rng.random() * norm >= p_plus)

        branch = branches[outcome]
        self.state = branch / math.sqrt(float(np.vdot(branch, branch).real))
        del self.axes[axis]
        return outcome


def run_pattern_direct(pattern: MeasurementPattern, rng: np.random.Generator,
                       cap: int = DEFAULT_DENSE_CAP) -> Dict[int, int]:
    "Unencrypted execution: outcomes s_v for every vertex"

    graph = pattern.graph
    if graph.vertex_count > cap:
        raise ValueError('Pattern on {0} qubits exceeds the dense backend limit of {1}'.format(
            graph.vertex_count, cap))

    backend = StatevectorBackend(cap)
    for v in graph.vertices:
        backend.prepare(v, PLUS)
    for u, v in graph.edges:
        backend.apply_cz(u, v)

    outcomes: Dict[int, int] = {}
    for v in pattern.measurement_order():
        s_x, s_z = pattern.signals(v, outcomes)
        outcomes[v] = backend.measure(v, corrected_angle(pattern.angles[v], s_x, s_z), rng)
    return outcomes


def random_pattern(graph_kind: str, size: int, rng: np.random.Generator) -> MeasurementPattern:
    "Line (`size` qubits) or square grid (`size` x `size`) with uniformly random angles"

    if graph_kind == 'line':
        return build_line_pattern(size, [int(k) for k in rng.integers(8, size=size)])
    if graph_kind == 'grid':
        return build_grid_pattern(size, size, [int(k) for k in rng.integers(8, size=size * size)])
    raise ValueError('Unknown pattern kind: {0}'.format(graph_kind))
