import itertools
import json

import pytest
from conftest import example1, line_graph, load_fixture

from mbqc_compact.flow import (
    Flow,
    FlowError,
    GFlow,
    SignalShiftedFlow,
    find_flow,
    influencing_path,
    max_delayed_gflow,
    max_delayed_gflow_bruteforce,
    reduced_open_graph,
    ssf_from_flow,
    verify_flow,
    verify_gflow,
    zpath_parities,
)
from mbqc_compact.graph import OpenGraph, path_graph
from mbqc_compact.pattern import measurement_rounds


@pytest.fixture
def path7():
    return path_graph(range(1, 8), [1], [7])


def test_find_flow_on_path(path7):
    fl = find_flow(path7)
    assert fl.f == {i: i + 1 for i in range(1, 7)}
    assert verify_flow(path7, fl) == []
    assert fl.layers[7] == 0 and fl.layers[1] == 6 and fl.depth == 6


def test_no_flow_on_gflow_only_graph():
    g = OpenGraph.from_dict(load_fixture("gflow_only_graph.json"))
    assert find_flow(g) is None
    gf = max_delayed_gflow(g)
    assert gf is not None and verify_gflow(g, gf) == []


def test_all_outputs_gives_empty_flow():
    g = OpenGraph.build([0, 1], [(0, 1)], [0, 1], [0, 1])
    fl = find_flow(g)
    assert fl.f == {} and set(fl.layers.values()) == {0} and fl.depth == 0
    ssf = ssf_from_flow(fl, g)
    assert ssf.g == {} and ssf.depth == 0


def test_verify_flow_reports_f3_violation(path7):
    fl = find_flow(path7)
    bad = Flow({**fl.f, 1: 3}, fl.layers)
    assert any(v.startswith("F3 at 1") for v in verify_flow(path7, bad))


def test_verify_flow_reports_injectivity(path7):
    fl = find_flow(path7)
    bad = Flow({**fl.f, 1: 3}, fl.layers)
    assert any(v.startswith("injectivity") for v in verify_flow(path7, bad))


def test_verify_gflow_reports_g3(path7):
    fl = find_flow(path7)
    g = dict(ssf_from_flow(fl, path7).g)
    g[1] = frozenset({3})
    problems = verify_gflow(path7, GFlow(g, fl.layers))
    assert any(v.startswith("G3 at 1") for v in problems)


def test_zpath_parity_examples(path7):
    fl = find_flow(path7)
    table = zpath_parities(fl, path7)
    # Z-correction of 1 lands on N(f(1)) - 1 = {3}
    assert table.parity(1, 3) == 1
    assert all(table.parity(i, i) == 1 for i in fl.f)
    two = OpenGraph.build([1, 2, 3, 4], [(1, 2), (3, 4)], [1, 3], [2, 4])
    t2 = zpath_parities(find_flow(two), two)
    assert t2.parity(1, 3) == 0 and t2.parity(3, 1) == 0


def test_ssf_line_graph_exact_sets():
    g = line_graph()
    fl = find_flow(g)
    ssf = ssf_from_flow(fl, g)
    assert ssf.g == {6: {7}, 5: {6}, 3: {4, 6}, 1: {2, 4, 6}}
    assert ssf.z == {6: set(), 5: {7}, 3: {7}, 1: {7}}
    assert ssf.layers == {2: 0, 4: 0, 7: 0, 6: 1, 1: 2, 3: 2, 5: 2}


def test_ssf_example1_layers():
    ex = example1()
    assert ex.flow.depth == 5
    assert ex.ssf.depth == 2
    # layers count back from the outputs, so 7 sits with the last round
    assert ex.ssf.partition() == [frozenset({3, 6, 8}), frozenset({2, 5, 7}), frozenset({1, 4})]
    rounds = measurement_rounds(ex.shifted)
    assert {v for v, r in rounds.items() if r == 1} == {1, 4, 7}
    assert {v for v, r in rounds.items() if r == 2} == {2, 5}


def test_flow_order_example1():
    ex = example1()
    order = sorted(ex.flow.f, key=lambda v: -ex.flow.layers[v])
    assert order == [1, 4, 2, 5, 7]


def test_ssf_single_edge():
    g = OpenGraph.build([1, 2], [(1, 2)], [1], [2])
    ssf = ssf_from_flow(find_flow(g), g)
    assert ssf.g == {1: {2}} and ssf.depth == 1
    assert isinstance(ssf, SignalShiftedFlow)


def test_max_delayed_matches_ssf_on_fixtures():
    for g in (line_graph(), example1().graph):
        fl = find_flow(g)
        assert max_delayed_gflow(g).partition() == ssf_from_flow(fl, g).partition()


def test_max_delayed_absent_without_gflow():
    g = OpenGraph.from_dict(load_fixture("no_gflow_graph.json"))
    assert max_delayed_gflow(g) is None
    assert max_delayed_gflow_bruteforce(g) is None


def _has_any_gflow(g: OpenGraph) -> bool:
    # exhaustive search over correcting-set maps and orders given by layer labels
    meas = sorted(g.non_outputs)
    cands = sorted(g.non_inputs)
    subsets = [frozenset(c) for r in range(len(cands) + 1) for c in itertools.combinations(cands, r)]
    for sets in itertools.product(subsets, repeat=len(meas)):
        gmap = dict(zip(meas, sets))
        for labels in itertools.product(range(1, len(meas) + 1), repeat=len(meas)):
            layers = {v: 0 for v in g.vertices}
            layers.update(zip(meas, labels))
            if not verify_gflow(g, GFlow(gmap, layers)):
                return True
    return False


@pytest.mark.parametrize(
    "edges, ins, outs",
    [
        ([(0, 1)], [0], [1]),
        ([(0, 1)], [0, 2], [1]),
        ([(0, 1), (1, 2)], [0], [2]),
        ([(0, 2), (1, 2)], [0, 1], [2]),
        ([(0, 1), (2, 3)], [0, 2], [1, 3]),
    ],
)
def test_gflow_existence_against_exhaustive_search(edges, ins, outs):
    verts = {v for e in edges for v in e} | set(ins) | set(outs)
    g = OpenGraph.build(verts, edges, ins, outs)
    assert (max_delayed_gflow(g) is not None) == _has_any_gflow(g)


def test_reduced_open_graph_line():
    g = line_graph()
    fl = find_flow(g)
    red, removed = reduced_open_graph(g, ssf_from_flow(fl, g), fl)
    assert removed == {7}
    assert set(red.outputs) == {2, 4, 6} and len(red.outputs) == len(g.outputs)
    assert verify_flow(red, find_flow(red)) == []


def test_reduced_open_graph_depth_one():
    g = OpenGraph.build([1, 2, 3, 4], [(1, 3), (2, 4)], [1, 2], [3, 4])
    fl = find_flow(g)
    red, removed = reduced_open_graph(g, ssf_from_flow(fl, g), fl)
    assert removed == {3, 4}
    assert red.vertices == {1, 2} and set(red.outputs) == {1, 2} and red.edges == frozenset()


def test_reduced_open_graph_depth_zero():
    g = OpenGraph.build([0, 1], [(0, 1)], [0, 1], [0, 1])
    fl = find_flow(g)
    red, removed = reduced_open_graph(g, ssf_from_flow(fl, g), fl)
    assert red == g and removed == frozenset()


def test_reduced_open_graph_rejects_mismatch():
    g = line_graph()
    fl = find_flow(g)
    with pytest.raises(FlowError):
        reduced_open_graph(g, GFlow({1: frozenset({2})}, fl.layers), fl)


@pytest.mark.parametrize("j, expected", [(2, (1, 2)), (4, (1, 2, 3, 4)), (6, (1, 2, 3, 4, 5, 6))])
def test_influencing_path_line(j, expected):
    g = line_graph()
    fl = find_flow(g)
    assert influencing_path(fl, ssf_from_flow(fl, g), g, 1, j).vertices == expected


def test_influencing_path_requires_member():
    g = line_graph()
    fl = find_flow(g)
    with pytest.raises(FlowError):
        influencing_path(fl, ssf_from_flow(fl, g), g, 1, 7)


def test_flow_json_round_trip():
    ex = example1()
    data = json.loads(json.dumps(ex.flow.to_dict()))
    assert Flow.from_dict(data) == ex.flow
    gdata = json.loads(json.dumps(ex.ssf.to_dict()))
    assert GFlow.from_dict(gdata).g == ex.ssf.g
