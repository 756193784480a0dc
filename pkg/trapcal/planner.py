"""
Gate-ordering plans that make every depolarizing parameter identifiable.

A triple (u, v, w) with (u,v), (v,w) in E yields two orderings that differ
only in the relative order of those two gates, both applied after every
other gate. The bias ratio at trap u isolates lambda_{(v,w),v}; at trap w it
isolates lambda_{(u,v),v}. Vertex-disjoint triples can share the same pair of
orderings, so triples are colored in their conflict graph and each color
class costs two orderings. Degree-1 vertices and cross-talk parameters get
their own schedules. Every equation is checked against `support_set` before
it enters the plan.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from .circuit import GateOrdering, support_set
from .graphs import Edge, Graph, VertexColoring, canonical_edge, greedy_color, largest_first_order
from .noise import NoiseMode, ParamKey, default_support, format_key, parameter_keys

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class OrderedTriple:
    u: int
    v: int
    w: int

    @property
    def first_edge(self) -> Edge:
        return canonical_edge(self.u, self.v)

    @property
    def second_edge(self) -> Edge:
        return canonical_edge(self.v, self.w)

    def vertices(self) -> FrozenSet[int]:
        return frozenset((self.u, self.v, self.w))


@dataclass(frozen=True)
class ConflictGraph:
    triples: Tuple[OrderedTriple, ...]
    graph: Graph


class EquationKind(Enum):
    RATIO = 'ratio'
    ABSOLUTE = 'absolute'


@dataclass(frozen=True)
class Equation:
    """
    bias(with_id, trap) / bias(without_id, trap) equals the parameter's
    eigenvalue (ratio), or bias(with_id, trap) equals it alone (absolute).
    """
    param: ParamKey
    trap: int
    with_id: str
    without_id: Optional[str]
    kind: EquationKind


@dataclass
class OrderingPlan:
    mode: NoiseMode
    support: Mapping[Edge, FrozenSet[int]]
    cover: Tuple[OrderedTriple, ...]
    conflict: ConflictGraph
    classes: VertexColoring
    orderings: List[GateOrdering] = field(default_factory=list)
    equations: List[Equation] = field(default_factory=list)
    unidentifiable: List[ParamKey] = field(default_factory=list)
    rejected: List[Equation] = field(default_factory=list)

    def ordering(self, ordering_id: str) -> GateOrdering:
        for ordering in self.orderings:
            if ordering.ordering_id == ordering_id:
                return ordering
        raise ValueError('Unknown ordering id: {0}'.format(ordering_id))

    @property
    def ordering_ids(self) -> List[str]:
        return [o.ordering_id for o in self.orderings]

    def covered_keys(self) -> FrozenSet[ParamKey]:
        return frozenset(eq.param for eq in self.equations)

    def equations_for(self, key: ParamKey) -> List[Equation]:
        return [eq for eq in self.equations if eq.param == key]

    def stats(self) -> Dict[str, int]:
        h = self.conflict.graph
        return {
            'orderings': len(self.orderings),
            'triples': len(self.cover),
            'conflict_edges': len(h.edges),
            'conflict_max_degree': h.max_degree,
            'greedy_bound': h.max_degree + 1 if h.vertex_count else 0,
            'colors': self.classes.k,
            'equations': len(self.equations),
            'unidentifiable': len(self.unidentifiable),
        }


def build_triple_cover(graph: Graph) -> Tuple[OrderedTriple, ...]:
    """
    For every vertex of degree >= 2, pair consecutive incident edges into
    triples centered there; an odd last edge is paired with the first one.
    """
    cover = []
    for v in graph.vertices:
        neighbors = graph.neighbors(v)
        if len(neighbors) < 2:
            continue
        for i in range(0, len(neighbors) - 1, 2):
            cover.append(OrderedTriple(neighbors[i], v, neighbors[i + 1]))
        if len(neighbors) % 2:
            cover.append(OrderedTriple(neighbors[-1], v, neighbors[0]))
    return tuple(sorted(cover))


def build_conflict_graph(cover: Sequence[OrderedTriple]) -> ConflictGraph:
    triples = tuple(cover)
    by_vertex: Dict[int, List[int]] = {}
    for index, triple in enumerate(triples):
        for vertex in triple.vertices():
            by_vertex.setdefault(vertex, []).append(index)

    edges = set()
    for members in by_vertex.values():
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                edges.add(canonical_edge(a, b))

    return ConflictGraph(triples, Graph(len(triples), tuple(edges)))


def color_conflict_graph(conflict: ConflictGraph) -> VertexColoring:
    return greedy_color(conflict.graph, largest_first_order(conflict.graph))


def _ordering_with_tail(graph: Graph, tail: Sequence[Edge], ordering_id: str) -> GateOrdering:
    tail_set = set(tail)
    head = [edge for edge in graph.edges if edge not in tail_set]
    return GateOrdering(tuple(head) + tuple(tail), ordering_id)


def _ordering_with_head(graph: Graph, head: Sequence[Edge], ordering_id: str) -> GateOrdering:
    head_set = set(head)
    tail = [edge for edge in graph.edges if edge not in head_set]
    return GateOrdering(tuple(head) + tuple(tail), ordering_id)


def _param(mode: NoiseMode, edge: Edge, qubit: int) -> ParamKey:
    return (edge, qubit) if mode is NoiseMode.PER_QUBIT else edge


def synthesize_orderings(graph: Graph, conflict: ConflictGraph, classes: VertexColoring,
                         mode: NoiseMode = NoiseMode.PER_QUBIT
                         ) -> Tuple[List[GateOrdering], List[Equation]]:
    if not classes.is_proper(conflict.graph):
        raise ValueError('Triple classes are not a proper coloring of the conflict graph')

    orderings = []
    equations = []
    for color, members in enumerate(classes.classes()):
        triples = [conflict.triples[i] for i in members]
        if not triples:
            continue
        tail_a: List[Edge] = []
        tail_b: List[Edge] = []
        for t in triples:
            tail_a.extend((t.first_edge, t.second_edge))
            tail_b.extend((t.second_edge, t.first_edge))

        a = _ordering_with_tail(graph, tail_a, 'c{0}a'.format(color))
        b = _ordering_with_tail(graph, tail_b, 'c{0}b'.format(color))
        orderings.extend((a, b))

        for t in triples:
            equations.append(Equation(_param(mode, t.second_edge, t.v), t.u, b.ordering_id, a.ordering_id,
                                      EquationKind.RATIO))
            equations.append(Equation(_param(mode, t.first_edge, t.v), t.w, a.ordering_id, b.ordering_id,
                                      EquationKind.RATIO))
    return orderings, equations


def degree_one_schedule(graph: Graph, mode: NoiseMode = NoiseMode.PER_QUBIT
                        ) -> Tuple[List[GateOrdering], List[Equation]]:
    """
    For a leaf v on edge e=(v,w), applying e before every other gate on w
    leaves lambda_{e,v} as the only factor of the trap bias at v. Leaves that
    hang off the same vertex w cannot share an ordering, so the k-th leaf of
    every center goes into batch k.
    """
    leaves_by_center: Dict[int, List[int]] = {}
    for v in graph.vertices:
        if graph.degree(v) == 1:
            leaves_by_center.setdefault(graph.neighbors(v)[0], []).append(v)

    batches: List[List[int]] = []
    for center in sorted(leaves_by_center):
        for k, leaf in enumerate(leaves_by_center[center]):
            if k == len(batches):
                batches.append([])
            batches[k].append(leaf)

    orderings = []
    equations = []
    for k, leaves in enumerate(batches):
        head = sorted({canonical_edge(v, graph.neighbors(v)[0]) for v in leaves})
        ordering = _ordering_with_head(graph, head, 'l{0}'.format(k))
        orderings.append(ordering)
        for v in sorted(leaves):
            edge = canonical_edge(v, graph.neighbors(v)[0])
            equations.append(Equation(_param(mode, edge, v), v, ordering.ordering_id, None, EquationKind.ABSOLUTE))
    return orderings, equations


def crosstalk_equations(graph: Graph, support: Mapping[Edge, FrozenSet[int]]
                        ) -> Tuple[List[GateOrdering], List[Equation], List[ParamKey]]:
    """
    For u in nu(f) outside f, an edge e=(t,u) with t outside nu(f) gives
    bias(f before e) / bias(e before f) = lambda_{f,u} at trap t, both gates
    last. Parameters without such an edge are returned as unidentifiable.
    """
    orderings: List[GateOrdering] = []
    equations: List[Equation] = []
    unidentifiable: List[ParamKey] = []

    for f in sorted(support):
        for u in sorted(set(support[f]) - set(f)):
            witness = None
            for e in graph.incident_edges(u):
                t = e[0] if e[1] == u else e[1]
                if t not in support[f]:
                    witness = (e, t)
                    break

            if witness is None:
                logger.warning('Cross-talk parameter %s has no witness edge', format_key((f, u), graph))
                unidentifiable.append((f, u))
                continue

            e, t = witness
            index = len(orderings) // 2
            before = _ordering_with_tail(graph, (e, f), 'x{0}a'.format(index))
            after = _ordering_with_tail(graph, (f, e), 'x{0}b'.format(index))
            orderings.extend((before, after))
            equations.append(Equation((f, u), t, after.ordering_id, before.ordering_id, EquationKind.RATIO))

    return orderings, equations, unidentifiable


def validate_equation(graph: Graph, orderings: Mapping[str, GateOrdering], equation: Equation,
                      mode: NoiseMode, support: Mapping[Edge, FrozenSet[int]]) -> bool:
    "True iff the two support sets differ by exactly the declared parameter"

    with_keys = support_set(graph, orderings[equation.with_id], equation.trap, mode, support)
    if equation.kind is EquationKind.ABSOLUTE:
        return with_keys == Counter({equation.param: 1})

    without_keys = support_set(graph, orderings[equation.without_id], equation.trap, mode, support)
    return with_keys - without_keys == Counter({equation.param: 1}) and not without_keys - with_keys


def build_plan(graph: Graph, mode: NoiseMode = NoiseMode.PER_QUBIT,
               support: Optional[Mapping[Edge, FrozenSet[int]]] = None) -> OrderingPlan:
    if support is None:
        support = default_support(graph)

    cover = build_triple_cover(graph)
    conflict = build_conflict_graph(cover)
    classes = color_conflict_graph(conflict)

    candidates: List[GateOrdering] = []
    equations: List[Equation] = []

    orderings, eqs = synthesize_orderings(graph, conflict, classes, mode)
    candidates.extend(orderings)
    equations.extend(eqs)

    orderings, eqs = degree_one_schedule(graph, mode)
    candidates.extend(orderings)
    equations.extend(eqs)

    unidentifiable: List[ParamKey] = []
    if mode is NoiseMode.PER_QUBIT and any(set(nu) != set(edge) for edge, nu in support.items()):
        orderings, eqs, unidentifiable = crosstalk_equations(graph, support)
        candidates.extend(orderings)
        equations.extend(eqs)

    # identical sequences collapse onto the first id that produced them
    by_sequence: Dict[Tuple[Edge, ...], GateOrdering] = {}
    alias: Dict[str, str] = {}
    for ordering in candidates:
        kept = by_sequence.setdefault(ordering.sequence, ordering)
        alias[ordering.ordering_id] = kept.ordering_id
    kept_orderings = list(by_sequence.values())
    lookup = {o.ordering_id: o for o in kept_orderings}

    plan = OrderingPlan(mode, dict(support), cover, conflict, classes, kept_orderings)
    for eq in equations:
        eq = Equation(eq.param, eq.trap, alias[eq.with_id],
                      alias[eq.without_id] if eq.without_id is not None else None, eq.kind)
        if validate_equation(graph, lookup, eq, mode, support):
            plan.equations.append(eq)
        else:
            logger.warning('Dropping equation for %s at trap %s (%s vs %s): support sets do not isolate it',
                           format_key(eq.param, graph), graph.label(eq.trap), eq.with_id, eq.without_id)
            plan.rejected.append(eq)

    covered = plan.covered_keys()
    for key in parameter_keys(mode, support):
        if key not in covered and key not in unidentifiable:
            unidentifiable.append(key)
    plan.unidentifiable = unidentifiable

    if plan.unidentifiable:
        logger.warning('%d parameters are not covered by any equation', len(plan.unidentifiable))

    logger.info('Plan: %d triples, %d colors, %d orderings, %d equations',
                len(cover), classes.k, len(plan.orderings), len(plan.equations))
    return plan
