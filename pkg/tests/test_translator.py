from __future__ import annotations

import math

import numpy as np
import pytest
from helpers import pattern_fit, unitary_fit
from oracles import dense_pattern

from mbqc_circuits.circuit import CX, CZ, Circuit, J, normal_form
from mbqc_circuits.fixtures import I1, I2, I3, O1, O2, O3, g_fig2, g_line, g_line3
from mbqc_circuits.flow import Flow, find_flow, find_max_delayed_gflow
from mbqc_circuits.graph import OpenGraph
from mbqc_circuits.pathcover import NoGflowError, build_matching_gflow
from mbqc_circuits.simulator import circuit_unitary, equal_up_to_phase, pattern_map
from mbqc_circuits.translator import (
    MeasurementPattern,
    NotReducibleError,
    build_graph_sequence,
    circuit_to_pattern,
    flow_generators,
    flow_path_cover,
    parallelize_j,
    position_relation,
    push_j_forward,
    reverse_spt,
    spt_flow,
    translate_gflow_pattern,
    transitive_closure,
)

FIG2_ANGLES = {I1: math.pi / 4, I2: math.pi / 3, I3: math.pi / 7}


def _pattern(g, angles):
    return MeasurementPattern.with_gflow(g, angles)


def _flow_pattern(g, angles):
    f = find_flow(g)
    return MeasurementPattern(g, angles, f.layers), f


def _closure(vertices, rel):
    """Reachability by repeated boolean matrix squaring."""
    idx = {v: k for k, v in enumerate(vertices)}
    m = np.zeros((len(idx), len(idx)), dtype=bool)
    for u, vs in rel.items():
        for v in vs:
            m[idx[u], idx[v]] = True
    for _ in range(len(idx)):
        m = m | (m.astype(int) @ m.astype(int) > 0)
    return {(u, v) for u in vertices for v in vertices if m[idx[u], idx[v]]}


def test_pattern_requires_angles():
    with pytest.raises(ValueError, match="missing angles"):
        MeasurementPattern(g_line(), {})
    with pytest.raises(NoGflowError):
        MeasurementPattern.with_gflow(OpenGraph.create([1, 2], [], [1], [2]), {1: 0.0})


def test_spt_flow_line_examples():
    p, f = _flow_pattern(g_line(), {1: 0.3})
    assert spt_flow(p, f).gates == (J(0, 0.3),)
    p, f = _flow_pattern(g_line3(), {1: 0.3, 2: 0.5})
    c = spt_flow(p, f)
    assert c.gates == (J(0, 0.3), J(0, 0.5)) and c.n_wires == 1


def test_spt_flow_two_paths_with_cross_edge():
    a, b, c_, d = range(4)
    g = OpenGraph.create(range(4), [(a, b), (c_, d), (a, d)], [a, c_], [b, d])
    angles = {a: 0.7, c_: 1.9}
    f = Flow({a: b, c_: d}, (frozenset({b, d}), frozenset({a}), frozenset({c_})))
    circ = spt_flow(MeasurementPattern(g, angles, f.layers), f)
    # wire 0 is a -> b, wire 1 is c -> d; the CZ sits at a! and d!
    assert circ.gates == (J(1, 1.9), CZ(0, 1), J(0, 0.7))
    s_dev, err = pattern_fit(circ, g, angles)
    assert s_dev < 1e-12 and err < 1e-12
    ref = dense_pattern(g, angles)
    assert equal_up_to_phase(ref, pattern_map(g, angles).matrix, 1e-12) == pytest.approx((0.0, 1.0))


def test_circuit_to_pattern_examples():
    p = circuit_to_pattern(Circuit(1, (J(0, 0.4),)))
    assert p.graph.edges == ((0, 1),) and p.graph.inputs == {0} and p.graph.outputs == {1}
    assert p.angles == {0: 0.4}
    c = Circuit(2, (J(0, 0.4), J(1, 1.1), CZ(0, 1)))
    p = circuit_to_pattern(c)
    g = p.graph
    assert len(g.vertices) == 4 and g.outputs == {2, 3}
    assert set(g.edges) == {(0, 2), (1, 3), (2, 3)}
    # label the wires by their path endpoints so the oracle legs line up
    s_dev, err = pattern_fit(Circuit(2, c.gates, paths=((0, 2), (1, 3))), g, p.angles)
    assert s_dev < 1e-12 and err < 1e-12
    with pytest.raises(ValueError, match="unsupported gate"):
        circuit_to_pattern(Circuit(2, (CX(0, 1),)))


def test_spt_round_trip_on_flow_corpus(corpus, corpus_flows):
    checked = 0
    for e in corpus:
        f = corpus_flows[e.index]
        if f is None:
            continue
        c = spt_flow(MeasurementPattern(e.graph, e.angles, f.layers), f)
        p2, f2 = reverse_spt(c)
        c2 = spt_flow(p2, f2)
        assert normal_form(c2.gates) == normal_form(c.gates), e.index
        checked += 1
    assert checked >= 100


def test_graph_sequence_fig2():
    g = g_fig2()
    seq = build_graph_sequence(g, build_matching_gflow(g, find_max_delayed_gflow(g)))
    want = {(I1, O1), (I1, O2), (I2, O2), (I2, O3), (I3, O3)}
    assert set(seq.graphs[-1].edges) == want
    assert seq.conjugators == (((O1, O3),), (), ())
    assert seq.u_o == (("CX", O1, O3),)
    # final graph: each h(v_i) sees exactly Odd_{G'}(g_V(v_i))
    assert seq.graphs[-1].neighbors(O2) == {I1, I2}


def test_graph_sequence_line_is_trivial():
    g = g_line()
    seq = build_graph_sequence(g, build_matching_gflow(g, find_max_delayed_gflow(g)))
    assert seq.graphs[0] == seq.graphs[-1] and seq.conjugators == ((),)


def test_output_edge_moves_to_output_clifford():
    base = g_fig2()
    g = base.with_edges([*base.edges, (O1, O2)])
    seq = build_graph_sequence(g, build_matching_gflow(g, find_max_delayed_gflow(g)))
    assert seq.oo_edges == ((O1, O2),)
    assert (O1, O2) not in seq.graphs[0].edges
    assert seq.u_o[-1] == ("CZ", O1, O2)


def test_translate_fig2_derived_order():
    c = translate_gflow_pattern(_pattern(g_fig2(), FIG2_ANGLES))
    a1, a2, a3 = FIG2_ANGLES[I1], FIG2_ANGLES[I2], FIG2_ANGLES[I3]
    assert c.gates == (J(2, a3), CZ(1, 2), J(1, a2), CZ(0, 1), J(0, a1), CX(0, 2))
    assert c.paths == ((I1, O1), (I2, O2), (I3, O3))
    s_dev, err = pattern_fit(c, g_fig2(), FIG2_ANGLES)
    assert s_dev < 1e-12 and err < 1e-12


def test_translate_line_matches_spt():
    p = _pattern(g_line(), {1: 0.9})
    f = find_flow(g_line())
    assert translate_gflow_pattern(p).gates == spt_flow(p, f).gates == (J(0, 0.9),)


def test_translate_without_measurements():
    g = OpenGraph.create([0, 1, 2], [(0, 1), (1, 2)], [0, 1, 2], [0, 1, 2])
    c = translate_gflow_pattern(_pattern(g, {}))
    assert c.gates == (CZ(0, 1), CZ(1, 2))
    s_dev, err = pattern_fit(c, g, {})
    assert s_dev < 1e-12 and err < 1e-12


def test_translate_matches_oracle_on_corpus(corpus):
    for e in corpus:
        c = translate_gflow_pattern(_pattern(e.graph, e.angles))
        s_dev, err = pattern_fit(c, e.graph, e.angles)
        assert s_dev < 1e-10 and err < 1e-9, e.index
        assert c.n_wires == len(e.graph.outputs) == len(c.paths)


def test_translate_matches_brute_force_on_small_graphs(small_corpus):
    for e in small_corpus:
        c = translate_gflow_pattern(_pattern(e.graph, e.angles))
        ref = dense_pattern(e.graph, e.angles)
        u = circuit_unitary(c).reorder(sorted(e.graph.outputs), sorted(e.graph.inputs))
        fit = equal_up_to_phase(ref, u.matrix, 1e-10)
        assert fit is not None and fit[1] == pytest.approx(2.0 ** (-len(e.graph.non_outputs) / 2)), e.index


def test_spt_and_translate_agree_on_flow_graphs(corpus, corpus_flows):
    seen = 0
    for e in corpus:
        f = corpus_flows[e.index]
        if f is None:
            continue
        c_spt = spt_flow(MeasurementPattern(e.graph, e.angles, f.layers), f)
        s_dev, err = pattern_fit(c_spt, e.graph, e.angles)
        assert s_dev < 1e-10 and err < 1e-9, e.index
        c_tr = translate_gflow_pattern(_pattern(e.graph, e.angles))
        assert unitary_fit(c_spt, c_tr) < 1e-9, e.index
        seen += 1
    assert seen >= 100


def test_position_order_equals_flow_order(corpus, corpus_flows):
    for e in corpus:
        g = e.graph
        f = corpus_flows[e.index]
        if f is None:
            continue
        pos = transitive_closure(position_relation(g, flow_path_cover(g, f.f)))
        pos_pairs = {(u, v) for u, vs in pos.items() for v in vs}
        assert pos_pairs == _closure(g.vertices, flow_generators(g, f.f)), e.index


def test_parallelize_fig2():
    c = translate_gflow_pattern(_pattern(g_fig2(), FIG2_ANGLES))
    lc = parallelize_j(c)
    assert lc.initial == ()
    assert [layer.index for layer in lc.layers] == [1, 0]
    assert [j.wire for j in lc.layers[0].js] == [0, 1, 2]
    assert lc.layers[0].clifford == (CX(2, 1), CX(1, 0))
    assert lc.layers[1].js == () and lc.layers[1].clifford == (CX(0, 2),)
    assert unitary_fit(lc.to_circuit(), c) < 1e-12


def test_parallelize_on_corpus(corpus):
    for e in corpus:
        c = translate_gflow_pattern(_pattern(e.graph, e.angles))
        depth = find_max_delayed_gflow(e.graph).depth
        lc = parallelize_j(c)
        assert len(lc.layers) == depth + 1
        js = [j for layer in lc.layers for j in layer.js]
        assert sorted(j.vertex for j in js) == sorted(e.graph.non_outputs)
        for layer in lc.layers:
            wires = [j.wire for j in layer.js]
            assert len(wires) == len(set(wires))
            assert all(isinstance(gate, (CZ, CX)) for gate in layer.clifford)
        assert all(isinstance(gate, (CZ, CX)) for gate in lc.initial)
        assert unitary_fit(lc.to_circuit(), c) < 1e-12, e.index


def test_push_j_forward_examples():
    assert push_j_forward([J(0, 0.2)]) == ([J(0, 0.2)], [])
    one = [CZ(0, 1), CZ(2, 3), J(1, 0.3), J(3, 0.4)]
    two = [CZ(2, 3), CZ(0, 1), J(3, 0.4), J(1, 0.3)]
    js1, rest1 = push_j_forward(one)
    js2, rest2 = push_j_forward(two)
    assert set(rest1) == set(rest2) == {CX(0, 1), CX(2, 3)}
    c1 = Circuit(4, (*js1, *rest1))
    c2 = Circuit(4, (*js2, *rest2))
    assert unitary_fit(c1, Circuit(4, tuple(one))) < 1e-12
    assert unitary_fit(c1, c2) < 1e-12
    with pytest.raises(NotReducibleError):
        push_j_forward([J(0, 0.1), J(0, 0.2)])
    with pytest.raises(NotReducibleError):
        push_j_forward([CX(1, 0), J(0, 0.1)])


def test_parallelize_requires_segments():
    with pytest.raises(NotReducibleError):
        parallelize_j(Circuit(1, (J(0, 0.1),)))
