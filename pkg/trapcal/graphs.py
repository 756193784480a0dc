import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


def canonical_edge(u: int, v: int) -> Edge:
    if u == v:
        raise ValueError('Self-loop on vertex {0} is not a valid edge'.format(u))
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """
    Simple undirected graph on the dense vertex range 0..vertex_count-1.

    Edges are stored canonicalized ((u, v) with u < v) and sorted, so that
    iterating `edges` always yields the same order. `labels` are only used for
    rendering (e.g. 1-based labels or grid coordinates).
    """
    vertex_count: int
    edges: Tuple[Edge, ...] = ()
    labels: Optional[Tuple[str, ...]] = None
    _adjacency: Tuple[Tuple[int, ...], ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.vertex_count < 0:
            raise ValueError('Negative vertex count: {0}'.format(self.vertex_count))

        edges = set()
        for edge in self.edges:
            u, v = canonical_edge(int(edge[0]), int(edge[1]))
            if v >= self.vertex_count or u < 0:
                raise ValueError('Edge {0} out of range for {1} vertices'.format(edge, self.vertex_count))
            if (u, v) in edges:
                raise ValueError('Duplicate edge {0}'.format((u, v)))
            edges.add((u, v))

        if self.labels is not None and len(self.labels) != self.vertex_count:
            raise ValueError('Expected {0} labels, got {1}'.format(self.vertex_count, len(self.labels)))

        adjacency: List[List[int]] = [[] for _ in range(self.vertex_count)]
        for u, v in edges:
            adjacency[u].append(v)
            adjacency[v].append(u)

        object.__setattr__(self, 'edges', tuple(sorted(edges)))
        object.__setattr__(self, '_adjacency', tuple(tuple(sorted(n)) for n in adjacency))

    @property
    def vertices(self) -> range:
        return range(self.vertex_count)

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return self._adjacency[v]

    def degree(self, v: int) -> int:
        return len(self._adjacency[v])

    @property
    def max_degree(self) -> int:
        return max((len(n) for n in self._adjacency), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return u != v and v in self._adjacency[u]

    def incident_edges(self, v: int) -> Tuple[Edge, ...]:
        return tuple(canonical_edge(v, w) for w in self._adjacency[v])

    def is_independent(self, vertices: Iterable[int]) -> bool:
        chosen = set(vertices)
        return not any(w in chosen for v in chosen for w in self._adjacency[v])

    def check_vertex(self, v: int) -> None:
        if not 0 <= v < self.vertex_count:
            raise ValueError('Vertex {0} out of range for {1} vertices'.format(v, self.vertex_count))

    def label(self, v: int) -> str:
        if self.labels is None:
            return str(v)
        return self.labels[v]

    def edge_label(self, edge: Edge) -> str:
        return '({0},{1})'.format(self.label(edge[0]), self.label(edge[1]))

    def to_networkx(self) -> nx.Graph:
        nx_graph = nx.Graph()
        nx_graph.add_nodes_from(self.vertices)
        nx_graph.add_edges_from(self.edges)
        return nx_graph


@dataclass(frozen=True)
class VertexColoring:
    color_of: Tuple[int, ...]
    k: int

    def classes(self) -> List[Tuple[int, ...]]:
        members: List[List[int]] = [[] for _ in range(self.k)]
        for v, color in enumerate(self.color_of):
            members[color].append(v)
        return [tuple(m) for m in members]

    def is_proper(self, graph: Graph) -> bool:
        if len(self.color_of) != graph.vertex_count:
            return False
        return all(self.color_of[u] != self.color_of[v] for u, v in graph.edges)


def build_cluster_state(width: int, height: int) -> Graph:
    "Square lattice with row-major vertex indices and (row,col) labels"

    if width < 1 or height < 1:
        raise ValueError('Lattice dimensions must be positive, got {0}x{1}'.format(width, height))

    edges = []
    for row in range(height):
        for col in range(width):
            v = row * width + col
            if col + 1 < width:
                edges.append((v, v + 1))
            if row + 1 < height:
                edges.append((v, v + width))

    labels = tuple('({0},{1})'.format(row + 1, col + 1) for row in range(height) for col in range(width))
    return Graph(width * height, tuple(edges), labels)


DIAMOND_KITE_EDGES = ((2, 4), (2, 3), (3, 4), (1, 4), (1, 2))


def build_diamond_kite() -> Graph:
    # 1-based labels on the outside, 0-based indices inside
    edges = tuple((u - 1, v - 1) for u, v in DIAMOND_KITE_EDGES)
    return Graph(4, edges, ('1', '2', '3', '4'))


def build_path(length: int) -> Graph:
    if length < 1:
        raise ValueError('Path length must be positive, got {0}'.format(length))
    edges = tuple((v, v + 1) for v in range(length - 1))
    return Graph(length, edges, tuple(str(v + 1) for v in range(length)))


def greedy_color(graph: Graph, order: Optional[Sequence[int]] = None) -> VertexColoring:
    "Assigns each vertex, in `order`, the smallest color unused by its colored neighbors"

    if order is None:
        order = list(graph.vertices)

    if sorted(order) != list(graph.vertices):
        raise ValueError('Coloring order must be a permutation of the vertices')

    coloring = nx.greedy_color(graph.to_networkx(), strategy=lambda _graph, _colors: iter(order))

    color_of = tuple(coloring[v] for v in graph.vertices)
    k = max(color_of) + 1 if color_of else 0
    return VertexColoring(color_of, k)


def largest_first_order(graph: Graph) -> List[int]:
    return sorted(graph.vertices, key=lambda v: (-graph.degree(v), v))
