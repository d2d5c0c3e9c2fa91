from __future__ import annotations

import dataclasses

import pytest
from oracles import def1_problems, matching_problems, restricted_basis

from mbqc_circuits.fixtures import I1, I2, I3, O1, O2, O3, g_fig2, g_line, g_line3, g_nogflow, g_triv
from mbqc_circuits.flow import Gflow, find_max_delayed_gflow, verify_gflow
from mbqc_circuits.pathcover import (
    InternalConsistencyError,
    NoGflowError,
    PathCover,
    build_matching_gflow,
    build_path_cover,
    matching_rounds,
    reduce_outputs,
)


def test_restricted_basis_oracle_examples():
    assert restricted_basis([{O1, O3}, {O1, O2, O3}, {O1, O2}], {O1, O2, O3})
    assert not restricted_basis([{O1, O3}, {O1, O2}, {O2, O3}], {O1, O2, O3})
    assert not restricted_basis([{O1}], {O1, O2})


def test_matching_gflow_fig2():
    g = g_fig2()
    mg = build_matching_gflow(g, find_max_delayed_gflow(g))
    assert {v: set(mg.g_v[v]) for v in mg.order} == {I1: {O1, O3}, I2: {O2}, I3: {O3}}
    assert mg.h == {I1: O1, I2: O2, I3: O3}
    assert mg.r == frozenset({O1, O2, O3})
    assert mg.order == (I1, I2, I3)
    assert matching_problems(g, mg) == []
    # g_V(i2) = g(i1) ⊕ g(i2), g_V(i3) = g(i2) ⊕ g(i3)
    assert mg.provenance[I2].u == {I1} and mg.provenance[I3].u == {I2}
    swapped = dataclasses.replace(mg, h={I1: O1, I2: O3, I3: O2})
    assert matching_problems(g, swapped) == [f"R-c edge {I2}", f"R-c edge {I3}"]
    unmodified = dataclasses.replace(mg, g_v=dict(mg.base.g))
    assert matching_problems(g, unmodified) == [f"R-c edge {I3}"]
    # Odd({o2}) = {i1, i2} reaches the not yet processed i2
    early = dataclasses.replace(mg, g_v={**mg.g_v, I1: frozenset({O2})}, h={**mg.h, I1: O2})
    assert f"R-d {I1}" in matching_problems(g, early)


def test_matching_gflow_line():
    g = g_line()
    gmax = find_max_delayed_gflow(g)
    mg = build_matching_gflow(g, gmax)
    assert mg.g_v == gmax.g and mg.h == {1: 2} and mg.r == {2}


def test_matching_gflow_empty_layer_is_internal_error():
    g = g_triv()
    with pytest.raises(InternalConsistencyError):
        build_matching_gflow(g, find_max_delayed_gflow(g))


def test_reduce_outputs_examples():
    g = g_fig2()
    gmax = find_max_delayed_gflow(g)
    red, gf = reduce_outputs(g, gmax, {O1, O2, O3})
    assert set(red.vertices) == {I1, I2, I3} and not red.edges
    assert red.outputs == {I1, I2, I3} and gf.depth == 0
    with pytest.raises(ValueError, match="R-a"):
        reduce_outputs(g, gmax, set())
    line = g_line()
    red, gf = reduce_outputs(line, find_max_delayed_gflow(line), {2})
    assert set(red.vertices) == {1} and red.inputs == {1} and red.outputs == {1}
    assert gf.g == {} and gf.layers == (frozenset({1}),)


def test_reduce_outputs_rejects_dependent_set():
    # right size, but the restricted correcting sets are dependent
    g = g_fig2()
    gmax = find_max_delayed_gflow(g)
    dep = Gflow({I1: frozenset({O1, O2}), I2: frozenset({O1, O2}), I3: gmax.g[I3]}, gmax.layers)
    with pytest.raises(ValueError, match="R-b"):
        reduce_outputs(g, dep, {O1, O2, O3})


def test_path_cover_examples():
    assert build_path_cover(g_fig2()).paths == ((I1, O1), (I2, O2), (I3, O3))
    assert build_path_cover(g_triv()).paths == ((1,),)
    assert build_path_cover(g_line3()).paths == ((1, 2, 3),)
    with pytest.raises(NoGflowError, match="graph has no gflow"):
        build_path_cover(g_nogflow())


def test_path_cover_json():
    pc = build_path_cover(g_line3())
    assert pc.to_dict() == {"paths": [[1, 2, 3]]}
    assert PathCover(((1, 2, 3),)).to_json() == '{"paths": [[1, 2, 3]]}'


def test_def1_oracle_rejects_bad_covers():
    g = g_line3()
    assert def1_problems(g, [(1, 2, 3)]) == []
    assert def1_problems(g, [(1, 3), (2,)]) == ["(1, 3) uses a non-edge"]
    assert def1_problems(g, [(1, 2)]) == ["not a disjoint cover"]
    assert def1_problems(g, [(3, 2, 1)])


def test_rounds_on_corpus(corpus):
    for e in corpus:
        for rnd in matching_rounds(e.graph):
            g, gf, mg = rnd.graph, rnd.gflow, rnd.matching
            assert matching_problems(g, mg) == [], e.index
            red, red_gf = reduce_outputs(g, gf, mg.r)
            assert verify_gflow(red, red_gf) == [], e.index
            assert red_gf.layers == (gf.layers[0] - mg.r | gf.layers[1],) + gf.layers[2:]
            assert find_max_delayed_gflow(red).layers == red_gf.layers, e.index


def test_path_covers_on_corpus(corpus):
    for e in corpus:
        g = e.graph
        pc = build_path_cover(g)
        assert def1_problems(g, pc.paths) == [], e.index
        assert len(pc.paths) == len(g.outputs)
        arcs = {}
        for rnd in matching_rounds(g):
            for v, r in rnd.matching.h.items():
                assert r in rnd.matching.g_v[v] and g.has_edge(v, r)
                arcs[v] = r
        assert pc.successor() == arcs
