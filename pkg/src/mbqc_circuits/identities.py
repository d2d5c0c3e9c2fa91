"""Numerical checks of the circuit identities behind the acausal calculus.

Every instance builds both sides of an identity as dense maps and reports the
max-norm error. Families:

``stateCNOT`` / ``measCNOT``
    A CNOT whose target is freshly prepared in ``|+⟩`` (or about to be
    post-selected onto ``⟨+|``) can be added or removed.
``CNOT_CZ``
    ``CZ_{A;B} CX_{C;B} = CX_{C;B} CZ_{A;C} CZ_{A;B}``.
``acausal-a`` .. ``acausal-d``
    One application of :func:`~mbqc_circuits.acausal.apply_acausal_identity`
    leaves the post-selected map unchanged up to a positive scalar.
``BSS``
    The two-ancilla acausal CZ gadget equals the curved-wire gadget, where
    one endpoint qubit is teleported back in time by a post-selected Bell
    pair.
``stabilizer-K`` / ``stabilizer-CK`` / ``edge-rewrite``
    ``K(g_V(v_i))`` and its controlled version stabilize the open graph
    state without output-output edges, and applying the controlled version
    turns ``|G_{i-1}⟩`` into ``CX_{h; g_V ⊕ h} |G_i⟩``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from mbqc_circuits.acausal import ACCZ, ACX, PCZ, AcausalCircuit, PGate, apply_acausal_identity, expand_acausal
from mbqc_circuits.circuit import CX, CZ, H, J, Op, Postselect, Prep
from mbqc_circuits.fixtures import g_fig2
from mbqc_circuits.simulator import (
    CX_MAT,
    CZ_MAT,
    PLUS,
    ControlledPauli,
    PauliString,
    PostselectedCircuit,
    build_graph_state,
    postselected_map,
    stabilizer_check,
)
from mbqc_circuits.translator import translation_rounds

if TYPE_CHECKING:
    from collections.abc import Hashable, Sequence

    from mbqc_circuits.graph import OpenGraph

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class IdentityCheck:
    """Result of one identity instance."""

    name: str
    family: str
    error: float
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} error={self.error:.3e}"


# dense helpers ------------------------------------------------------------------------


def _random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def _apply(vec: np.ndarray, labels: Sequence[Hashable], mat: np.ndarray, on: Sequence[Hashable]) -> np.ndarray:
    """``mat`` acting on qubits ``on`` of a state whose axes are ``labels``."""
    n, k = len(labels), len(on)
    t = vec.reshape((2,) * n)
    axes = [list(labels).index(q) for q in on]
    t = np.tensordot(mat.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(t, list(range(k)), axes).reshape(-1)


def _bra_on(vec: np.ndarray, labels: Sequence[Hashable], q: Hashable, bra: np.ndarray) -> np.ndarray:
    t = vec.reshape((2,) * len(labels))
    return np.tensordot(bra, t, axes=([0], [list(labels).index(q)])).reshape(-1)


def _positive_fit_error(a: np.ndarray, b: np.ndarray) -> float:
    """``max|a - s b|`` for the positive ``s`` read off the largest entry of ``b``.

    Infinite when the two maps differ by a non-positive factor or ``b`` is zero.
    """
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[k]) < 1e-15:
        return math.inf
    factor = a[k] / b[k]
    s = abs(factor)
    err = float(np.max(np.abs(a - s * b)))
    return err if s > 0 else math.inf


def _check(name: str, family: str, error: float, tol: float) -> IdentityCheck:
    return IdentityCheck(name, family, float(error), bool(error < tol))


# CNOT identities ----------------------------------------------------------------------


def _state_cnot(rng: np.random.Generator, n_rest: int, tol: float) -> IdentityCheck:
    rest = [f"r{k}" for k in range(n_rest)]
    a = rest[int(rng.integers(n_rest))]
    labels = [*rest, "B"]
    vec = np.kron(_random_state(rng, n_rest), PLUS)
    err = np.max(np.abs(_apply(vec, labels, CX_MAT, [a, "B"]) - vec))
    return _check(f"stateCNOT rest={n_rest} control={a}", "stateCNOT", err, tol)


def _meas_cnot(rng: np.random.Generator, n_rest: int, tol: float) -> IdentityCheck:
    rest = [f"r{k}" for k in range(n_rest)]
    a = rest[int(rng.integers(n_rest))]
    labels = [*rest, "B"]
    # a generic state on rest+B, so the identity is tested on the whole space
    vec = _random_state(rng, n_rest + 1)
    bra = PLUS.conj()
    lhs = _bra_on(vec, labels, "B", bra)
    rhs = _bra_on(_apply(vec, labels, CX_MAT, [a, "B"]), labels, "B", bra)
    return _check(f"measCNOT rest={n_rest} control={a}", "measCNOT", np.max(np.abs(lhs - rhs)), tol)


def _cnot_cz(rng: np.random.Generator, order: Sequence[str], tol: float) -> IdentityCheck:
    labels = list(order)
    n = len(labels)
    err = 0.0
    for k in range(2**n):
        basis = np.zeros(2**n, dtype=complex)
        basis[k] = 1
        # operator products read right to left: CX_{C;B} acts first on the left side
        lhs = _apply(_apply(basis, labels, CX_MAT, ["C", "B"]), labels, CZ_MAT, ["A", "B"])
        rhs = _apply(basis, labels, CZ_MAT, ["A", "B"])
        rhs = _apply(rhs, labels, CZ_MAT, ["A", "C"])
        rhs = _apply(rhs, labels, CX_MAT, ["C", "B"])
        err = max(err, float(np.max(np.abs(lhs - rhs))))
    return _check(f"CNOT_CZ wires={''.join(labels)}", "CNOT_CZ", err, tol)


# acausal identities -----------------------------------------------------------------


def _toy(
    rng: np.random.Generator,
    paths: Sequence[Sequence[int]],
    inputs: Sequence[int],
    schedule: Sequence[int],
    gates: Sequence[PGate],
) -> AcausalCircuit:
    paths = tuple(tuple(p) for p in paths)
    angles = {v: float(rng.uniform(0, 2 * math.pi)) for p in paths for v in p[:-1]}
    return AcausalCircuit(paths, frozenset(inputs), angles, tuple(schedule), tuple(gates))


def _acausal_case(
    name: str,
    which: str,
    c: AcausalCircuit,
    site: int | tuple[int, int],
    tol: float,
    prob_ratio: float | None = None,
) -> IdentityCheck:
    res = apply_acausal_identity(c, which, site)
    if not res.applied:
        return IdentityCheck(name, f"acausal-{which}", math.inf, False)
    before = postselected_map(expand_acausal(c, all_gates=True))
    after = postselected_map(expand_acausal(res.circuit, all_gates=True))
    a = before.map.reorder(after.map.out_labels, after.map.in_labels).matrix
    err = _positive_fit_error(a, after.map.matrix)
    if prob_ratio is not None:
        err = max(err, abs(before.probability / after.probability - prob_ratio))
    return _check(name, f"acausal-{which}", err, tol)


def _acausal_cases(rng: np.random.Generator, tol: float) -> list[IdentityCheck]:
    two = ((0, 1), (2, 3))
    three = ((0, 1), (2, 3), (4, 5))
    out = [
        _acausal_case(
            "acausal-a same-slice 2 wires", "a", _toy(rng, two, [0, 2], [0, 2], [ACCZ(1, 2, 0)]), 0, tol, 0.25
        ),
        _acausal_case(
            "acausal-a two wire starts", "a", _toy(rng, two, [0, 2], [0, 2], [ACCZ(0, 2, 0)]), 0, tol, 0.25
        ),
        _acausal_case(
            "acausal-a next to an acausal gate",
            "a",
            _toy(rng, three, [0, 2, 4], [0, 2, 4], [ACCZ(1, 3, 0), ACCZ(0, 5, 1)]),
            0,
            tol,
            0.25,
        ),
        _acausal_case(
            "acausal-a CZ to ACCZ", "a", _toy(rng, two, [0, 2], [0, 2], [PCZ(1, 2, 0)]), 0, tol, 4.0
        ),
        _acausal_case(
            "acausal-b through J", "b", _toy(rng, two, [0, 2], [0, 2], [ACX(1, 3, frozenset(), 0)]), 0, tol
        ),
        _acausal_case(
            "acausal-b after a passed gate",
            "b",
            _toy(rng, two, [0, 2], [0, 2], [ACCZ(0, 3, 0), ACX(1, 3, frozenset({0}), 1)]),
            1,
            tol,
        ),
        _acausal_case(
            "acausal-b removed on |+>", "b", _toy(rng, two, [0], [0, 2], [ACX(1, 2, frozenset(), 0)]), 0, tol
        ),
        _acausal_case(
            "acausal-b three-vertex wire",
            "b",
            _toy(rng, ((0, 1, 2), (3, 4)), [0, 3], [0, 1, 3], [ACX(4, 2, frozenset(), 0)]),
            0,
            tol,
        ),
        _acausal_case(
            "acausal-c third wire",
            "c",
            _toy(rng, three, [0, 2, 4], [0, 2, 4], [ACCZ(3, 4, 0), ACX(1, 3, frozenset(), 1)]),
            (1, 0),
            tol,
        ),
        _acausal_case(
            "acausal-c onto the control wire",
            "c",
            _toy(rng, three, [0, 2, 4], [0, 2, 4], [ACCZ(3, 0, 0), ACX(1, 3, frozenset(), 1)]),
            (1, 0),
            tol,
        ),
        _acausal_case(
            "acausal-c 2 wires",
            "c",
            _toy(rng, two, [0, 2], [0, 2], [ACCZ(1, 3, 0), ACX(0, 3, frozenset(), 1)]),
            (1, 0),
            tol,
        ),
        _acausal_case(
            "acausal-d acausal pair",
            "d",
            _toy(rng, two, [0, 2], [0, 2], [ACCZ(0, 3, 0), ACCZ(0, 3, 1)]),
            (0, 1),
            tol,
            1 / 16,
        ),
        _acausal_case(
            "acausal-d same-slice pair",
            "d",
            _toy(rng, two, [0, 2], [0, 2], [ACCZ(1, 2, 0), ACCZ(1, 2, 1)]),
            (0, 1),
            tol,
            1 / 16,
        ),
        _acausal_case(
            "acausal-d single wire pair",
            "d",
            _toy(rng, two, [0, 2], [0, 2], [ACCZ(0, 1, 0), ACCZ(0, 1, 1), ACCZ(1, 2, 2)]),
            (0, 1),
            tol,
            1 / 16,
        ),
    ]
    return out


# curved-wire equivalence ------------------------------------------------------------


def _defacausal(u: int, v: int, a: int, b: int) -> tuple[list[Op], list[Op]]:
    return [Prep(a), Prep(b), CZ(u, a), CZ(a, b), Postselect(a)], [CZ(b, v), Postselect(b)]


def _curved_wire(u: int, v: int, a: int, b: int) -> tuple[list[Op], list[Op]]:
    # Bell pair (a, b); a stands in for v's future state and meets u now.
    early: list[Op] = [Prep(a), Prep(b), CZ(a, b), H(b), CZ(u, a)]
    # later: v hands over to a (swap), then the Bell measurement on (a, b) keeps Φ+
    late: list[Op] = [CX(v, a), CX(a, v), CX(v, a), H(b), CZ(a, b), Postselect(a), Postselect(b)]
    return early, late


def _bss_case(rng: np.random.Generator, n_main: int, tol: float) -> IdentityCheck:
    u, v = 0, 1
    a, b = n_main, n_main + 1

    def rand_j(w: int) -> list[Op]:
        return [J(w, float(rng.uniform(0, 2 * math.pi))) for _ in range(int(rng.integers(1, 3)))]

    before_u, mid_v, after = rand_j(u), rand_j(v), rand_j(u) + rand_j(v)
    links: list[Op] = [CZ(u, v)]
    if n_main == 3:
        links += [CZ(v, 2), *rand_j(2), CZ(u, 2)]

    def build(gadget: Callable[[int, int, int, int], tuple[list[Op], list[Op]]]) -> np.ndarray:
        early, late = gadget(u, v, a, b)
        # u's endpoint sits before the CZ that feeds v's endpoint, so the gate reaches back in time
        ops = [*before_u, *early, *links, *mid_v, *late, *after]
        c = PostselectedCircuit(n_main, 2, tuple(ops))
        return postselected_map(c).map.matrix

    m_def, m_bss = build(_defacausal), build(_curved_wire)
    err = _positive_fit_error(m_def, m_bss)
    return _check(f"BSS curved wire main={n_main}", "BSS", err, tol)


# controlled stabilizers --------------------------------------------------------------


def _stabilizer_cases(g: OpenGraph, rng: np.random.Generator, n_inputs: int, tol: float, tag: str) -> list[IdentityCheck]:
    rounds, _ = translation_rounds(g)
    rnd = rounds[0]
    mg, seq = rnd.matching, rnd.sequence
    labels = list(g.vertices)
    out: list[IdentityCheck] = []
    for trial in range(n_inputs):
        phi = _random_state(rng, len(g.inputs))
        states = [build_graph_state(gi, phi) for gi in seq.graphs]
        for i, vi in enumerate(mg.order, start=1):
            h = mg.h[vi]
            s = sorted(mg.g_v[vi] - {h})
            g_prev = seq.graphs[i - 1]
            odd = sorted(g_prev.odd(s))
            state = states[i - 1]
            vec = state.matrix[:, 0]
            k_op = PauliString.from_sets(s, odd)
            ck_op = ControlledPauli(h, k_op)
            name = f"{tag} v{i}={vi} h={h} input#{trial}"
            for family, op in (("stabilizer-K", k_op), ("stabilizer-CK", ck_op)):
                err = float(np.max(np.abs(op.matrix_on(labels) @ vec - vec)))
                ok = stabilizer_check(state, op, tol)
                out.append(IdentityCheck(f"{family} {name}", family, err, ok and err < tol))
            # the controlled stabilizer factors as CX_{h;S} CZ_{h;Odd(S)}, which rewrites the edges at h
            nxt = states[i].matrix[:, 0]
            for t in s:
                nxt = _apply(nxt, labels, CX_MAT, [h, t])
            out.append(_check(f"edge-rewrite {name}", "edge-rewrite", np.max(np.abs(nxt - vec)), tol))
    return out


# suite --------------------------------------------------------------------------------


def run_identity_suite(seed: int = 0, tol: float = DEFAULT_TOL) -> list[IdentityCheck]:
    """Run every identity instance with random data drawn from ``seed``.

    Returns
    -------
    list of IdentityCheck
        In a fixed order; at least thirty instances.
    """
    rng = np.random.default_rng(seed)
    out: list[IdentityCheck] = []
    out += [_state_cnot(rng, n, tol) for n in (1, 2, 3, 3)]
    out += [_meas_cnot(rng, n, tol) for n in (1, 2, 3, 3)]
    out += [_cnot_cz(rng, order, tol) for order in ("ABC", "BCA", "CAB", "ACB")]
    out += _acausal_cases(rng, tol)
    out += [_bss_case(rng, n, tol) for n in (2, 2, 3, 3)]
    out += _stabilizer_cases(g_fig2(), rng, 2, tol, "G_FIG2")
    return out


__all__ = ["DEFAULT_TOL", "IdentityCheck", "run_identity_suite"]
