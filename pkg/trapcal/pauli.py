"""
Pauli strings on n qubits, restricted to what CZ circuits need.

A qubit q carries X iff bit q of `x_mask` is set, Z iff bit q of `z_mask` is
set, Y iff both. Global phase is not tracked.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .graphs import Edge, Graph

_KINDS = {'X': (1, 0), 'Y': (1, 1), 'Z': (0, 1)}


@dataclass(frozen=True)
class PauliOperator:
    num_qubits: int
    x_mask: int = 0
    z_mask: int = 0

    def __post_init__(self):
        limit = 1 << self.num_qubits
        if self.x_mask < 0 or self.z_mask < 0 or self.x_mask >= limit or self.z_mask >= limit:
            raise ValueError('Pauli masks exceed {0} qubits'.format(self.num_qubits))

    @classmethod
    def identity(cls, num_qubits: int) -> 'PauliOperator':
        return cls(num_qubits)

    @classmethod
    def single(cls, num_qubits: int, qubit: int, kind: str) -> 'PauliOperator':
        _check_qubit(num_qubits, qubit)
        x, z = _KINDS[kind]
        return cls(num_qubits, x << qubit, z << qubit)

    def check_qubit(self, qubit: int) -> None:
        _check_qubit(self.num_qubits, qubit)

    def has_x(self, qubit: int) -> bool:
        return bool(self.x_mask >> qubit & 1)

    def has_z(self, qubit: int) -> bool:
        return bool(self.z_mask >> qubit & 1)

    def has_support(self, qubit: int) -> bool:
        return bool((self.x_mask | self.z_mask) >> qubit & 1)

    def support(self) -> Tuple[int, ...]:
        mask = self.x_mask | self.z_mask
        return tuple(q for q in range(self.num_qubits) if mask >> q & 1)

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def __mul__(self, other: 'PauliOperator') -> 'PauliOperator':
        if other.num_qubits != self.num_qubits:
            raise ValueError('Cannot multiply Pauli operators of different sizes')
        return PauliOperator(self.num_qubits, self.x_mask ^ other.x_mask, self.z_mask ^ other.z_mask)

    def render(self, labels: Optional[Sequence[str]] = None) -> str:
        terms = []
        for q in self.support():
            kind = 'Y' if self.has_x(q) and self.has_z(q) else ('X' if self.has_x(q) else 'Z')
            terms.append(kind + (labels[q] if labels is not None else str(q)))
        return ' '.join(terms) if terms else 'I'

    def __str__(self) -> str:
        return self.render()


def _check_qubit(num_qubits: int, qubit: int) -> None:
    if not 0 <= qubit < num_qubits:
        raise ValueError('Qubit {0} out of range for {1} qubits'.format(qubit, num_qubits))


def conjugate_through_cz(p: PauliOperator, edge: Edge) -> PauliOperator:
    u, v = edge
    if u == v:
        raise ValueError('CZ needs two distinct qubits, got {0}'.format(edge))
    p.check_qubit(u)
    p.check_qubit(v)

    z_mask = p.z_mask
    if p.has_x(u):
        z_mask ^= 1 << v
    if p.has_x(v):
        z_mask ^= 1 << u
    return PauliOperator(p.num_qubits, p.x_mask, z_mask)


def trap_stabilizer(graph: Graph, v: int) -> PauliOperator:
    "X on the trap, Z on each of its neighbors"

    graph.check_vertex(v)
    z_mask = 0
    for w in graph.neighbors(v):
        z_mask |= 1 << w
    return PauliOperator(graph.vertex_count, 1 << v, z_mask)


def anticommutes_with_x(p: PauliOperator, v: int) -> bool:
    p.check_qubit(v)
    return p.has_z(v)
