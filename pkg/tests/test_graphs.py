import pytest

from trapcal.graphs import (Graph, VertexColoring, build_cluster_state, build_path, canonical_edge, greedy_color,
                            largest_first_order)


def test_cluster_state_shape():
    grid = build_cluster_state(12, 12)

    assert grid.vertex_count == 144
    assert len(grid.edges) == 264
    assert grid.max_degree == 4
    assert grid.label(0) == '(1,1)'
    assert grid.label(13) == '(2,2)'
    assert grid.has_edge(0, 1) and grid.has_edge(0, 12)
    assert not grid.has_edge(11, 12)


def test_diamond_kite(kite):
    assert kite.edges == ((0, 1), (0, 3), (1, 2), (1, 3), (2, 3))
    assert kite.neighbors(1) == (0, 2, 3)
    assert kite.edge_label((1, 2)) == '(2,3)'


def test_edges_are_canonical():
    graph = Graph(3, ((2, 1), (0, 1)))

    assert graph.edges == ((0, 1), (1, 2))
    assert graph.incident_edges(1) == ((0, 1), (1, 2))


@pytest.mark.parametrize('edges', [((0, 0),), ((0, 1), (1, 0)), ((0, 3),)])
def test_invalid_edges(edges):
    with pytest.raises(ValueError):
        Graph(3, edges)


def test_canonical_edge():
    assert canonical_edge(4, 2) == (2, 4)
    with pytest.raises(ValueError):
        canonical_edge(1, 1)


def test_greedy_coloring_is_proper():
    grid = build_cluster_state(5, 4)
    coloring = greedy_color(grid, largest_first_order(grid))

    assert coloring.is_proper(grid)
    assert coloring.k == 2
    for members in coloring.classes():
        assert grid.is_independent(members)


def test_kite_needs_three_colors(kite):
    coloring = greedy_color(kite, largest_first_order(kite))

    assert coloring.is_proper(kite)
    assert coloring.k == 3


def test_coloring_order_must_be_permutation():
    with pytest.raises(ValueError):
        greedy_color(build_path(3), [0, 1])


def test_improper_coloring():
    assert not VertexColoring((0, 0, 1), 2).is_proper(build_path(3))


def test_coloring_follows_the_order():
    path = build_path(3)

    assert greedy_color(path, [0, 2, 1]).color_of == (0, 1, 0)
    assert greedy_color(path, [1, 0, 2]).color_of == (1, 0, 1)


def test_to_networkx_keeps_isolated_vertices():
    graph = Graph(4, ((0, 1), (1, 2)))

    nx_graph = graph.to_networkx()

    assert sorted(nx_graph.nodes) == [0, 1, 2, 3]
    assert sorted(nx_graph.edges) == [(0, 1), (1, 2)]
    assert greedy_color(graph).color_of == (0, 1, 0, 0)
