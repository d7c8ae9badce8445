import pytest

from mbqc_compact.graph import (
    GraphError,
    OpenGraph,
    grid_graph,
    neighborhood_of_set,
    neighbors,
    odd_neighborhood,
    path_graph,
)


def test_build_normalizes_edges():
    g = OpenGraph.build([1, 2, 3], [(2, 1), (3, 2)], [1], [3])
    assert g.edges == frozenset({(1, 2), (2, 3)})
    assert g.has_edge(2, 1) and not g.has_edge(1, 3)


@pytest.mark.parametrize(
    "verts, edges, ins, outs",
    [
        ([1, 2], [(1, 1)], [1], [2]),
        ([1, 2], [(1, 3)], [1], [2]),
        ([1, 2], [(1, 2), (2, 1)], [1], [2]),
        ([1, 2], [], [5], [2]),
        ([1, 2], [], [1, 1], [2]),
        ([-1, 2], [], [], [2]),
    ],
)
def test_build_rejects_malformed(verts, edges, ins, outs):
    with pytest.raises(GraphError):
        OpenGraph.build(verts, edges, ins, outs)


def test_neighbors_and_unknown_vertex():
    g = path_graph(range(1, 5), [1], [4])
    assert neighbors(g, 2) == {1, 3}
    with pytest.raises(GraphError):
        neighbors(g, 9)


def test_odd_neighborhood_parity():
    g = path_graph(range(1, 6), [1], [5])
    assert odd_neighborhood(g, [2]) == {1, 3}
    # 3 is reached twice from {2, 4}
    assert odd_neighborhood(g, [2, 4]) == {1, 5}
    assert odd_neighborhood(g, []) == frozenset()
    assert neighborhood_of_set(g, [2, 4]) == {1, 3, 5}


def test_io_sets_and_degree():
    g = OpenGraph.build([1, 2, 3], [(1, 2), (1, 3)], [1], [2, 3])
    assert g.input_set == {1} and g.output_set == {2, 3}
    assert g.non_outputs == {1} and g.non_inputs == {2, 3}
    assert g.degree() == 2


def test_overlapping_inputs_and_outputs():
    g = OpenGraph.build([0, 1], [], [0, 1], [0, 1])
    assert g.non_outputs == frozenset()


def test_json_round_trip():
    g = OpenGraph.build([3, 1, 7], [(1, 3), (3, 7)], [1], [7, 3])
    assert OpenGraph.from_dict(g.to_dict()) == g
    assert OpenGraph.from_dict(g.to_dict()).outputs == (7, 3)


def test_grid_graph_shape():
    g = grid_graph(2, 3)
    assert len(g.vertices) == 6 and len(g.edges) == 7
    assert g.inputs == (0, 3) and g.outputs == (2, 5)
