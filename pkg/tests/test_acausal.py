from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from helpers import unitary_fit

from mbqc_circuits.acausal import (
    ACCZ,
    ACX,
    PCZ,
    TELEPORT_CORRECTIONS,
    AcausalCircuit,
    apply_acausal_identity,
    bell_branch,
    expand_acausal,
    rewrite_acausal_to_ordinary,
    sent_back_probabilities,
    spt_gflow,
    teleport_expand,
)
from mbqc_circuits.circuit import CX, CZ, J, gate_multiset, normal_form
from mbqc_circuits.fixtures import I1, I2, I3, O1, O2, O3, g_fig2, g_line
from mbqc_circuits.graph import OpenGraph
from mbqc_circuits.pathcover import InternalConsistencyError
from mbqc_circuits.simulator import (
    CZ_MAT,
    PostselectedCircuit,
    pattern_map,
    phase_fit,
    postselected_map,
)
from mbqc_circuits.translator import MeasurementPattern, translate_gflow_pattern, translation_rounds

FIG2_ANGLES = {I1: math.pi / 4, I2: math.pi / 3, I3: math.pi / 7}
# the widest corpus expansion keeps 22 qubits live at once
CORPUS_QUBITS = 22


def _pattern(g, angles):
    return MeasurementPattern.with_gflow(g, angles)


def _fig2():
    return spt_gflow(_pattern(g_fig2(), FIG2_ANGLES))


def _ps(c, **kw):
    return postselected_map(expand_acausal(c, **kw), max_qubits=CORPUS_QUBITS)


def _proportional(a, b):
    """Positive-scale fit of map ``a`` to map ``b`` up to phase; returns ``(scale, error)``."""
    _, s, err = phase_fit(a, b)
    return s, err


def _random_unitary(rng):
    q, r = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_spt_gflow_fig2_gates_and_slicing():
    c = _fig2()
    assert c.paths == ((I1, O1), (I2, O2), (I3, O3))
    assert {g.positions for g in c.gates} == {(I2, O1), (I3, O1), (I1, O2), (I2, O3)}
    assert {g.positions for g in c.acausal_gates()} == {(I2, O1), (I3, O1)}


def test_spt_gflow_flow_graphs_have_no_acausal_gates(corpus, corpus_flows):
    seen = 0
    for e in corpus:
        if corpus_flows[e.index] is None:
            continue
        assert spt_gflow(_pattern(e.graph, e.angles)).acausal_gates() == (), e.index
        seen += 1
    assert seen >= 100


def test_spt_gflow_start_positions_are_consistent():
    a, b, c_, d = range(4)
    g = OpenGraph.create(range(4), [(a, b), (c_, d), (a, c_)], [a, c_], [b, d])
    circ = spt_gflow(_pattern(g, {a: 0.1, c_: 0.2}))
    assert [g.positions for g in circ.gates] == [(a, c_)]
    assert circ.flags() == (True,) and circ.acausal_gates() == ()


def test_expand_structure():
    single = AcausalCircuit(((0,), (1,)), frozenset({0, 1}), {}, (), (ACCZ(0, 1, 0),))
    ps = expand_acausal(single, all_gates=True)
    assert ps.n_ancillas == 2
    counts = ps.counts()
    assert (counts["prep"], counts["CZ"], counts["postselect"]) == (2, 3, 2)
    # temporally consistent gates stay ordinary CZs by default
    assert expand_acausal(single).ops == (CZ(0, 1),)
    fig2 = expand_acausal(_fig2())
    assert fig2.n_ancillas == 4
    assert fig2.counts()["CZ"] == 2 + 3 * 2 and fig2.counts()["J"] == 3


def test_expand_without_acausal_gates_is_the_circuit():
    p = _pattern(g_line(), {1: 0.6})
    ps = expand_acausal(spt_gflow(p))
    assert ps.n_ancillas == 0 and ps.ops == (J(0, 0.6),)


def test_same_slice_gadget_is_quarter_weight_cz():
    single = AcausalCircuit(((0,), (1,)), frozenset({0, 1}), {}, (), (ACCZ(0, 1, 0),))
    res = postselected_map(expand_acausal(single, all_gates=True))
    assert np.max(np.abs(res.map.matrix - CZ_MAT / 2)) < 1e-12
    assert abs(res.probability - 0.25) < 1e-12


def test_fig2_expansion_weight_and_semantics():
    c = _fig2()
    ref = pattern_map(g_fig2(), FIG2_ANGLES)
    res = _ps(c)
    assert abs(res.probability - 4.0**-2) < 1e-12
    s, err = _proportional(ref, res.map)
    assert err < 1e-12 and s > 0
    full = _ps(c, all_gates=True)
    assert abs(full.probability - 4.0**-4) < 1e-12
    assert _proportional(ref, full.map)[1] < 1e-12


def test_expansion_matches_pattern_on_corpus(corpus):
    for e in corpus:
        c = spt_gflow(_pattern(e.graph, e.angles))
        res = _ps(c)
        s, err = _proportional(pattern_map(e.graph, e.angles), res.map)
        assert err < 1e-9 and s > 0, e.index
        assert abs(res.probability - 4.0 ** -len(c.acausal_gates())) < 1e-12, e.index


def test_shared_position_order_independence():
    c = _fig2()
    at_o1 = [g for g in c.gates if O1 in g.positions]
    assert len(at_o1) == 2
    # swapping the uids swaps the order in which the gadgets touch o1
    swapped = [dataclasses.replace(g, uid=h.uid) for g, h in zip(at_o1, reversed(at_o1))]
    other = tuple(g for g in c.gates if O1 not in g.positions)
    c2 = dataclasses.replace(c, gates=other + tuple(swapped))
    assert expand_acausal(c2, all_gates=True).ops != expand_acausal(c, all_gates=True).ops
    a, b = _ps(c, all_gates=True).map, _ps(c2, all_gates=True).map
    assert np.max(np.abs(a.matrix - b.reorder(a.out_labels, a.in_labels).matrix)) < 1e-12


def _check_invariant(before, after, ratio=None):
    x, y = _ps(before, all_gates=True), _ps(after, all_gates=True)
    s, err = _proportional(y.map, x.map)
    assert err < 1e-12 and s > 0
    if ratio is not None:
        assert abs(y.probability / x.probability - ratio) < 1e-12


def test_identity_a_round_trip():
    c = _fig2()
    consistent = next(g for g, ok in zip(c.gates, c.flags()) if ok)
    res = apply_acausal_identity(c, "a", consistent.uid)
    assert res.applied and isinstance(next(g for g in res.circuit.gates if g.uid == consistent.uid), PCZ)
    # an ordinary CZ is worth four times the expanded gadget
    _check_invariant(c, res.circuit, ratio=4.0)
    back = apply_acausal_identity(res.circuit, "a", consistent.uid)
    assert back.applied and set(back.circuit.gates) == set(c.gates)
    acausal = c.acausal_gates()[0]
    miss = apply_acausal_identity(c, "a", acausal.uid)
    assert not miss.applied and miss.circuit is c and "not temporally consistent" in miss.report


def test_identity_d_removes_duplicates():
    c = _fig2()
    g = c.gates[0]
    dup = dataclasses.replace(c, gates=c.gates + (ACCZ(g.p, g.q, c.next_uid()),))
    res = apply_acausal_identity(dup, "d", (g.uid, dup.next_uid() - 1))
    assert res.applied and set(res.circuit.gates) == set(c.gates) - {g}
    _check_invariant(dup, res.circuit, ratio=16.0)
    miss = apply_acausal_identity(c, "d", (c.gates[0].uid, c.gates[1].uid))
    assert not miss.applied and miss.circuit is c


def test_identities_b_and_c_chain_on_fig2():
    """Push an acausal CNOT from o1 onto o3 back through every gate at o3."""
    c = _fig2()
    uid = c.next_uid()
    state = dataclasses.replace(c, gates=c.gates + (ACX(O1, O3, frozenset(), uid),))
    early = apply_acausal_identity(state, "b", uid)
    assert not early.applied and "has not passed" in early.report
    for g in [g for g in state.gates if isinstance(g, ACCZ) and O3 in g.positions]:
        res = apply_acausal_identity(state, "c", (uid, g.uid))
        assert res.applied
        _check_invariant(state, res.circuit)
        state = res.circuit
    res = apply_acausal_identity(state, "b", uid)
    assert res.applied and res.report == "ACX through J -> ACCZ"
    new = next(g for g in res.circuit.gates if g.uid == uid)
    assert isinstance(new, ACCZ) and new.positions == (I3, O1)
    _check_invariant(state, res.circuit)


def test_identity_reports_on_mismatch():
    c = _fig2()
    assert not apply_acausal_identity(c, "b", c.gates[0].uid).applied
    assert not apply_acausal_identity(c, "c", c.gates[0].uid).applied
    assert not apply_acausal_identity(c, "z", 0).applied
    assert apply_acausal_identity(c, "a", 999).report == "site is not a CZ or ACCZ"


def test_rewrite_fig2_is_the_translated_circuit():
    c = _fig2()
    out = rewrite_acausal_to_ordinary(c, g_fig2())
    want = translate_gflow_pattern(_pattern(g_fig2(), FIG2_ANGLES))
    assert out.gates == want.gates
    a1, a2, a3 = FIG2_ANGLES[I1], FIG2_ANGLES[I2], FIG2_ANGLES[I3]
    assert out.gates == (J(2, a3), CZ(1, 2), J(1, a2), CZ(0, 1), J(0, a1), CX(0, 2))


def test_rewrite_without_acausal_gates():
    p = _pattern(g_line(), {1: 0.6})
    assert rewrite_acausal_to_ordinary(spt_gflow(p), g_line()).gates == (J(0, 0.6),)


def test_rewrite_rejects_foreign_wires():
    c = _fig2()
    bad = dataclasses.replace(c, paths=((I1, O2), (I2, O1), (I3, O3)), schedule=c.schedule)
    with pytest.raises(ValueError):
        rewrite_acausal_to_ordinary(bad, g_fig2())


def test_rewrite_matches_translation_on_corpus(corpus):
    for e in corpus:
        p = _pattern(e.graph, e.angles)
        out = rewrite_acausal_to_ordinary(spt_gflow(p), e.graph)
        ref = translate_gflow_pattern(p)
        assert normal_form(out.gates) == normal_form(ref.gates), e.index
        assert gate_multiset(out.gates) == gate_multiset(ref.gates), e.index
        assert unitary_fit(out, ref) < 1e-12, e.index


def test_rewrite_steps_follow_graph_sequence(corpus):
    for e in corpus[:60]:
        p = _pattern(e.graph, e.angles)
        rounds, _ = translation_rounds(e.graph)
        arcs = {v: r for rnd in rounds for v, r in rnd.matching.h.items()}
        seen = []

        def hook(layer, i, state, seen=seen):
            seen.append((layer, i, state.edge_set()))

        rewrite_acausal_to_ordinary(spt_gflow(p), e.graph, on_step=hook)
        assert len(seen) == sum(len(r.matching.order) + 1 for r in rounds)
        for layer, i, edges in seen:
            gi = rounds[layer - 1].sequence.graphs[i]
            want = {(a, b) for a, b in gi.edges if arcs.get(a) != b and arcs.get(b) != a}
            # output-output edges are already in the output Clifford
            want = {(a, b) for a, b in want if not (a in gi.outputs and b in gi.outputs)}
            assert edges == want, (e.index, layer, i)


def test_rewrite_detects_tampering():
    c = _fig2()
    extra = dataclasses.replace(c, gates=c.gates + (ACCZ(I1, O3, c.next_uid()),))
    with pytest.raises(InternalConsistencyError):
        rewrite_acausal_to_ordinary(extra, g_fig2())


# teleportation ---------------------------------------------------------------------


def test_bell_branches_are_paulis():
    for s, p in TELEPORT_CORRECTIONS.items():
        assert np.max(np.abs(2 * bell_branch(*s) - p)) < 1e-12


def test_teleport_postselect_identity():
    tg = teleport_expand(np.eye(2), np.eye(2), "postselect")
    assert list(tg.branches) == [(0, 0)]
    assert np.max(np.abs(tg.branches[(0, 0)] - np.eye(2) / 2)) < 1e-12


def test_teleport_pauli_correct_random_pairs():
    rng = np.random.default_rng(23)
    for _ in range(50):
        u, up = _random_unitary(rng), _random_unitary(rng)
        w = up @ u
        tg = teleport_expand(u, up, "pauli-correct")
        assert sorted(tg.branches) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        for b in tg.branches.values():
            assert np.max(np.abs(b - w / 2)) < 1e-12
        assert np.max(np.abs(tg.channel - np.kron(w.conj(), w))) < 1e-12
        post = teleport_expand(u, up, "postselect")
        assert np.max(np.abs(post.branches[(0, 0)] - w / 2)) < 1e-12


def test_teleport_accepts_gate_lists():
    tg = teleport_expand([J(0, 0.3)], [J(0, 1.1), J(0, 0.2)], "postselect")
    from mbqc_circuits.simulator import j_matrix

    want = j_matrix(0.2) @ j_matrix(1.1) @ j_matrix(0.3) / 2
    assert np.max(np.abs(tg.branches[(0, 0)] - want)) < 1e-12


def test_teleport_rejects_bad_input():
    with pytest.raises(ValueError):
        teleport_expand(np.diag([1, 2]), np.eye(2), "postselect")
    with pytest.raises(ValueError):
        teleport_expand(np.eye(2), np.eye(2), "guess")
    with pytest.raises(ValueError):
        teleport_expand([CZ(0, 1)], np.eye(2), "postselect")


def test_sent_back_probabilities():
    rng = np.random.default_rng(29)
    for _ in range(20):
        phi = rng.normal(size=2) + 1j * rng.normal(size=2)
        phi /= np.linalg.norm(phi)
        basis = _random_unitary(rng)
        want = np.abs(basis.conj().T @ phi) ** 2
        assert np.max(np.abs(sent_back_probabilities(phi, basis) - want)) < 1e-12


def test_postselected_circuit_rejects_dangling_ancilla():
    with pytest.raises(ValueError):
        postselected_map(PostselectedCircuit(1, 1, ()))
