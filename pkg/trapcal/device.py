"""
The server's simulated hardware.

Qubits arrive through a QuantumLink as opaque descriptors. A round is
entangled with the noisy CZ circuit in the ordering the server picked and
then measured one qubit at a time. Rounds containing dummy qubits run on the
Pauli frame; rounds made only of |+_theta> states run on the dense backend.
"""
import base64
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional

import numpy as np

from .circuit import GateOrdering, sample_error_frames
from .graphs import Graph
from .mbqc import DEFAULT_DENSE_CAP, Angle, StatevectorBackend, basis_state, plus_state
from .noise import NoiseMode, NoiseModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Preparation:
    """
    A dummy is the basis state |a>. Any other qubit is |+_theta>; its a bit
    is not applied here but enters through the flip bits of its neighbors.
    """
    vertex: int
    theta: Angle
    a: int
    dummy: bool = False

    def amplitudes(self) -> np.ndarray:
        if self.dummy:
            return basis_state(self.a)
        return plus_state(self.theta)

    def to_dict(self) -> Dict:
        return {'v': self.vertex, 't': self.theta.k, 'a': self.a, 'd': int(self.dummy)}

    @classmethod
    def from_dict(cls, data: Mapping) -> 'Preparation':
        return cls(int(data['v']), Angle(int(data['t'])), int(data['a']), bool(data['d']))


class QuantumLink(ABC):

    @abstractmethod
    def send(self, preparation: Preparation) -> str:
        "Hands a qubit over and returns the descriptor the server will see"

    @abstractmethod
    def receive(self, descriptor: str) -> Preparation:
        pass


class MemoryLink(QuantumLink):
    "Client-held store; descriptors are indices into it"

    def __init__(self):
        self.store: List[Preparation] = []

    def send(self, preparation: Preparation) -> str:
        self.store.append(preparation)
        return 'q{0}'.format(len(self.store) - 1)

    def receive(self, descriptor: str) -> Preparation:
        try:
            return self.store[int(descriptor[1:])]
        except (ValueError, IndexError):
            raise ValueError('Unknown qubit descriptor: {0}'.format(descriptor)) from None


class InlineLink(QuantumLink):
    "The descriptor carries the qubit itself, for client and server in different processes"

    def send(self, preparation: Preparation) -> str:
        raw = json.dumps(preparation.to_dict(), sort_keys=True).encode('utf-8')
        return base64.urlsafe_b64encode(raw).decode('ascii')

    def receive(self, descriptor: str) -> Preparation:
        try:
            return Preparation.from_dict(json.loads(base64.urlsafe_b64decode(descriptor.encode('ascii'))))
        except (ValueError, KeyError, TypeError) as e:
            raise ValueError('Malformed qubit descriptor: {0}'.format(e)) from e


@dataclass(frozen=True)
class ZAttack:
    "Deviation applying Z to one fixed qubit after every entangling step"
    vertex: int


class RoundSession(ABC):

    @abstractmethod
    def measure(self, vertex: int, delta: Angle) -> int:
        pass


class DenseSession(RoundSession):

    def __init__(self, backend: StatevectorBackend, rng: np.random.Generator):
        self.backend = backend
        self.rng = rng

    def measure(self, vertex: int, delta: Angle) -> int:
        return self.backend.measure(vertex, delta, self.rng)


class FrameSession(RoundSession):
    """
    Test rounds on the Pauli frame.

    A |+_theta> qubit whose neighbors are all dummies ends up in
    Z^c |+_theta>, c being the parity of the neighbors' a bits, so its
    outcome is deterministic for delta - theta - c*pi in {0, pi} up to the
    accumulated Z error. Depolarizing channels commute with the Z(theta)
    rotations, so the frame is tracked as if every theta were 0. Every other
    outcome is drawn uniformly.
    """

    def __init__(self, graph: Graph, preparations: Mapping[int, Preparation], z_frame: np.ndarray,
                 rng: np.random.Generator):
        self.graph = graph
        self.preparations = preparations
        self.z_frame = z_frame
        self.rng = rng

    def is_isolated_plus(self, vertex: int) -> bool:
        if self.preparations[vertex].dummy:
            return False
        return all(self.preparations[w].dummy for w in self.graph.neighbors(vertex))

    def measure(self, vertex: int, delta: Angle) -> int:
        if not self.is_isolated_plus(vertex):
            return int(self.rng.integers(2))

        c = 0
        for w in self.graph.neighbors(vertex):
            c ^= self.preparations[w].a
        k = (delta - self.preparations[vertex].theta).shifted(c).k
        if k == 0:
            outcome = 0
        elif k == 4:
            outcome = 1
        else:
            outcome = int(self.rng.integers(2))
        return outcome ^ int(self.z_frame[vertex])


class Device:

    def __init__(self, graph: Graph, noise: NoiseModel, rng: np.random.Generator,
                 dense_cap: int = DEFAULT_DENSE_CAP, attack: Optional[ZAttack] = None):
        if noise.mode is not NoiseMode.PER_QUBIT:
            raise ValueError('The device needs a per_qubit noise model')
        if attack is not None:
            graph.check_vertex(attack.vertex)
        self.graph = graph
        self.noise = noise
        self.rng = rng
        self.dense_cap = dense_cap
        self.attack = attack

    def entangle(self, round_index: int, preparations: Mapping[int, Preparation],
                 ordering: GateOrdering) -> RoundSession:
        if set(preparations) != set(self.graph.vertices):
            raise ValueError('Round {0} did not receive every qubit'.format(round_index))
        ordering.validate(self.graph)

        if any(p.dummy for p in preparations.values()):
            return self._frame_round(preparations, ordering)
        if self.graph.vertex_count > self.dense_cap:
            raise ValueError('Round {0} needs {1} dense qubits, limit is {2}'.format(
                round_index, self.graph.vertex_count, self.dense_cap))
        return self._dense_round(preparations, ordering)

    def _frame_round(self, preparations: Mapping[int, Preparation], ordering: GateOrdering) -> FrameSession:
        if self.noise.is_noiseless:
            z = np.zeros(self.graph.vertex_count, dtype=bool)
        else:
            _, frame = sample_error_frames(self.graph, ordering, self.noise, 1, self.rng)
            z = frame[:, 0].copy()
        if self.attack is not None:
            z[self.attack.vertex] ^= True
        return FrameSession(self.graph, preparations, z, self.rng)

    def _dense_round(self, preparations: Mapping[int, Preparation], ordering: GateOrdering) -> DenseSession:
        backend = StatevectorBackend(self.dense_cap)
        for v in self.graph.vertices:
            backend.prepare(v, preparations[v].amplitudes())

        for gate in ordering.sequence:
            backend.apply_cz(*gate)
            if self.noise.is_noiseless:
                continue
            for u, p in self.noise.channels(gate):
                draw = self.rng.random()
                if draw < p:
                    backend.apply_pauli(u, 'XYZ'[min(2, int(3 * draw / p))])

        if self.attack is not None:
            backend.apply_pauli(self.attack.vertex, 'Z')
        return DenseSession(backend, self.rng)
