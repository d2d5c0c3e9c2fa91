"""Dense-matrix oracle for graph states, patterns and circuits.

All maps are numpy arrays over explicit leg labels. A map with output labels
``(a, b)`` and input labels ``(c,)`` has shape ``(4, 2)``; the first label is
the most significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from mbqc_circuits.circuit import CX, CZ, H, J, Postselect, Prep

if TYPE_CHECKING:
    from collections.abc import Hashable, Iterable, Mapping, Sequence

    from mbqc_circuits.circuit import Circuit, Gate, Op
    from mbqc_circuits.graph import OpenGraph

MAX_QUBITS = 12

SQ2 = np.sqrt(2.0)
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HAD = np.array([[1, 1], [1, -1]], dtype=complex) / SQ2
PLUS = np.array([1, 1], dtype=complex) / SQ2
MINUS = np.array([1, -1], dtype=complex) / SQ2
CZ_MAT = np.diag([1, 1, 1, -1]).astype(complex)
CX_MAT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def j_matrix(alpha: float) -> np.ndarray:
    """``J(α) = (1/√2) [[1, e^{-iα}], [1, -e^{-iα}]]``."""
    e = np.exp(-1j * alpha)
    return np.array([[1, e], [1, -e]], dtype=complex) / SQ2


def plus_alpha_bra(alpha: float) -> np.ndarray:
    """Components of ``⟨+_α| = (⟨0| + e^{-iα}⟨1|)/√2``."""
    return np.array([1, np.exp(-1j * alpha)], dtype=complex) / SQ2


@dataclass(frozen=True)
class DenseMap:
    """Complex matrix with labelled output (row) and input (column) legs.

    Parameters
    ----------
    matrix : numpy.ndarray
        Array of shape ``(2**len(out_labels), 2**len(in_labels))``.
    out_labels, in_labels : tuple
        Leg labels, most significant first.
    """

    matrix: np.ndarray
    out_labels: tuple[Hashable, ...]
    in_labels: tuple[Hashable, ...] = ()

    def __post_init__(self) -> None:
        want = (2 ** len(self.out_labels), 2 ** len(self.in_labels))
        if self.matrix.shape != want:
            raise ValueError(f"matrix shape {self.matrix.shape} does not match labels {want}")

    def reorder(self, out_labels: Sequence[Hashable], in_labels: Sequence[Hashable] = ()) -> DenseMap:
        """Permute legs into the given label orders."""
        out_labels, in_labels = tuple(out_labels), tuple(in_labels)
        if sorted(map(repr, out_labels)) != sorted(map(repr, self.out_labels)) or sorted(
            map(repr, in_labels)
        ) != sorted(map(repr, self.in_labels)):
            raise ValueError("label sets differ")
        no, ni = len(self.out_labels), len(self.in_labels)
        t = self.matrix.reshape((2,) * (no + ni))
        perm = [self.out_labels.index(x) for x in out_labels] + [no + self.in_labels.index(x) for x in in_labels]
        t = np.transpose(t, perm)
        return DenseMap(t.reshape(2**no, 2**ni), out_labels, in_labels)

    def scaled(self, s: complex) -> DenseMap:
        return DenseMap(self.matrix * s, self.out_labels, self.in_labels)


def phase_fit(a: DenseMap | np.ndarray, b: DenseMap | np.ndarray) -> tuple[float, float, float]:
    """Best ``(θ, s, err)`` with ``a ≈ s e^{iθ} b`` anchored at the largest entry of ``b``.

    ``err`` is ``max|a - s e^{iθ} b|``. Labelled maps are aligned to ``a``'s
    leg order first. A zero ``b`` gives ``(0, 1, max|a|)``.
    """
    if isinstance(a, DenseMap) and isinstance(b, DenseMap):
        b = b.reorder(a.out_labels, a.in_labels)
    ma = a.matrix if isinstance(a, DenseMap) else np.asarray(a)
    mb = b.matrix if isinstance(b, DenseMap) else np.asarray(b)
    if ma.shape != mb.shape:
        raise ValueError("shape mismatch")
    k = np.unravel_index(np.argmax(np.abs(mb)), mb.shape)
    if abs(mb[k]) == 0:
        return 0.0, 1.0, float(np.max(np.abs(ma), initial=0.0))
    factor = ma[k] / mb[k]
    return float(np.angle(factor)), float(abs(factor)), float(np.max(np.abs(ma - factor * mb)))


def equal_up_to_phase(a: DenseMap | np.ndarray, b: DenseMap | np.ndarray, tol: float) -> tuple[float, float] | None:
    """Find ``(θ, s)`` with ``max|a - s e^{iθ} b| < tol`` and ``s > 0``.

    The largest-magnitude entry of ``b`` fixes the candidate factor. Labelled
    maps are aligned to ``a``'s leg order first.

    Returns
    -------
    tuple[float, float] or None
        Phase in ``(-π, π]`` and positive scale, or ``None``.
    """
    theta, s, err = phase_fit(a, b)
    mb = b.matrix if isinstance(b, DenseMap) else np.asarray(b)
    if not np.any(mb):
        return (0.0, 1.0) if err < tol else None
    if s == 0 or err >= tol:
        return None
    return theta, s


# tensor register -----------------------------------------------------------------


class Register:
    """Working tensor with one axis per live qubit and one trailing input axis.

    The trailing axis indexes the basis state fed into the input legs, so the
    register represents a linear map rather than a single state.
    """

    def __init__(self, input_labels: Sequence[Hashable] = (), max_qubits: int = MAX_QUBITS) -> None:
        n = len(input_labels)
        self.labels: list[Hashable] = list(input_labels)
        self.in_labels = tuple(input_labels)
        self.max_qubits = max_qubits
        self.t = np.eye(2**n, dtype=complex).reshape((2,) * n + (2**n,))

    def _axis(self, label: Hashable) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no live qubit {label!r}") from None

    def add(self, label: Hashable, vec: np.ndarray = PLUS) -> None:
        if label in self.labels:
            raise ValueError(f"qubit {label!r} already live")
        if len(self.labels) + 1 > self.max_qubits:
            raise MemoryError(f"more than {self.max_qubits} live qubits")
        t = np.tensordot(np.asarray(vec, dtype=complex), self.t, axes=0)
        self.t = np.moveaxis(t, 0, len(self.labels))
        self.labels.append(label)

    def apply(self, mat: np.ndarray, labels: Sequence[Hashable]) -> None:
        k = len(labels)
        axes = [self._axis(x) for x in labels]
        m = np.asarray(mat, dtype=complex).reshape((2,) * (2 * k))
        t = np.tensordot(m, self.t, axes=(list(range(k, 2 * k)), axes))
        self.t = np.moveaxis(t, list(range(k)), axes)

    def cz(self, a: Hashable, b: Hashable) -> None:
        ia, ib = self._axis(a), self._axis(b)
        idx = [slice(None)] * self.t.ndim
        idx[ia] = 1
        idx[ib] = 1
        self.t[tuple(idx)] *= -1

    def project(self, label: Hashable, bra: np.ndarray) -> None:
        """Contract ``bra`` (given by its components) onto a qubit and drop it."""
        ax = self._axis(label)
        self.t = np.tensordot(np.asarray(bra, dtype=complex), self.t, axes=([0], [ax]))
        self.labels.pop(ax)

    def to_map(self, out_order: Sequence[Hashable] | None = None) -> DenseMap:
        n = len(self.labels)
        dm = DenseMap(self.t.reshape(2**n, -1), tuple(self.labels), self.in_labels)
        if out_order is not None:
            dm = dm.reorder(out_order, self.in_labels)
        return dm


def _gate_matrix(gate: Gate) -> tuple[np.ndarray, tuple[int, ...]]:
    if isinstance(gate, J):
        return j_matrix(gate.angle), (gate.wire,)
    if isinstance(gate, H):
        return HAD, (gate.wire,)
    if isinstance(gate, CZ):
        return CZ_MAT, (gate.a, gate.b)
    if isinstance(gate, CX):
        return CX_MAT, (gate.control, gate.target)
    raise TypeError(f"unsupported gate {gate!r}")


def apply_gate(reg: Register, gate: Gate, label_of: Mapping[int, Hashable] | None = None) -> None:
    lab = (lambda w: w) if label_of is None else label_of.__getitem__
    if isinstance(gate, CZ):
        reg.cz(lab(gate.a), lab(gate.b))
        return
    mat, wires = _gate_matrix(gate)
    reg.apply(mat, [lab(w) for w in wires])


# graph states and patterns -----------------------------------------------------


def graph_state_map(g: OpenGraph) -> DenseMap:
    """``E_G |+⟩_{I^C}`` as a map from the input legs to all vertices."""
    inputs = sorted(g.inputs)
    reg = Register(inputs, max_qubits=max(MAX_QUBITS, len(g.vertices)))
    for v in g.vertices:
        if v not in g.inputs:
            reg.add(v)
    for u, v in g.edges:
        reg.cz(u, v)
    return reg.to_map(list(g.vertices))


def build_graph_state(g: OpenGraph, input_state: DenseMap | np.ndarray) -> DenseMap:
    """Open graph state ``E_G |φ⟩_I |+⟩_{I^C}`` as a column vector.

    Parameters
    ----------
    input_state : DenseMap or numpy.ndarray
        State on the inputs in ascending id order, of dimension ``2**|I|``.
    """
    vec = input_state.matrix if isinstance(input_state, DenseMap) else np.asarray(input_state, dtype=complex)
    vec = vec.reshape(-1)
    if vec.shape[0] != 2 ** len(g.inputs):
        raise ValueError("input state dimension does not match |I|")
    m = graph_state_map(g).matrix @ vec
    return DenseMap(m.reshape(-1, 1), tuple(g.vertices), ())


def pattern_map(g: OpenGraph, angles: Mapping[int, float]) -> DenseMap:
    """Post-selected all-``+`` branch of the pattern on ``g``.

    Contracts ``⟨+_{α_v}|`` for every non-output against ``E_G`` applied to
    ``|+⟩`` on non-inputs and the identity on inputs. Qubits are added in
    ascending id order and contracted as soon as all their neighbours are live.

    Returns
    -------
    DenseMap
        Map of shape ``2**|O| x 2**|I|``, outputs and inputs in ascending order.
    """
    missing = sorted(g.non_outputs - set(angles))
    if missing:
        raise ValueError(f"missing angles for {missing}")
    inputs = sorted(g.inputs)
    reg = Register(inputs)
    live: set[int] = set(inputs)
    measured: set[int] = set()

    def flush() -> None:
        for v in sorted(live):
            if v in g.outputs or v in measured:
                continue
            if g.neighbors(v) <= live | measured:
                reg.project(v, plus_alpha_bra(angles[v]))
                measured.add(v)
                live.discard(v)

    for u, v in g.edges:
        if u in g.inputs and v in g.inputs:
            reg.cz(u, v)
    flush()
    for v in g.vertices:
        if v in live or v in measured:
            continue
        reg.add(v)
        live.add(v)
        for w in sorted(g.neighbors(v)):
            if w in live and w != v:
                reg.cz(v, w)
        flush()
    return reg.to_map(sorted(g.outputs))


def circuit_map(c: Circuit) -> DenseMap:
    """Gate-product semantics of an ordinary circuit.

    Input legs are the non-prep wires; output legs are all wires. When the
    circuit carries path labels, legs are labelled by path endpoints.
    """
    in_labels = c.in_labels()
    out_labels = c.out_labels()
    wire_label = {w: ("w", w) for w in range(c.n_wires)}
    reg = Register([wire_label[w] for w in c.input_wires], max_qubits=max(MAX_QUBITS, c.n_wires))
    for w in range(c.n_wires):
        if w in c.prep_wires:
            reg.add(wire_label[w])
    for gate in c.gates:
        if not isinstance(gate, (J, H, CZ, CX)):
            raise TypeError(f"unsupported gate {gate!r}; expand acausal gates first")
        apply_gate(reg, gate, wire_label)
    dm = reg.to_map([wire_label[w] for w in range(c.n_wires)])
    return DenseMap(dm.matrix, out_labels, in_labels)


def circuit_unitary(c: Circuit) -> DenseMap:
    """Alias of :func:`circuit_map` for circuits without preparations."""
    return circuit_map(c)


@dataclass(frozen=True)
class PostselectedCircuit:
    """Circuit with ancilla wires that are prepared in ``|+⟩`` and post-selected.

    Wires ``0 .. n_wires-1`` are main wires; ancillas use the ids
    ``n_wires .. n_wires + n_ancillas - 1``. ``ops`` lists gates, ancilla
    preparations and post-selections in time order.
    """

    n_wires: int
    n_ancillas: int
    ops: tuple[Op, ...]
    prep_wires: frozenset[int] = frozenset()
    paths: tuple[tuple[int, ...], ...] | None = None

    def counts(self) -> dict[str, int]:
        out = {"prep": 0, "postselect": 0, "CZ": 0, "CX": 0, "J": 0, "H": 0}
        for op in self.ops:
            out[type(op).__name__.lower() if isinstance(op, (Prep, Postselect)) else type(op).__name__] += 1
        return out

    def to_jsonl(self) -> str:
        from mbqc_circuits.circuit import circuit_to_jsonl

        return circuit_to_jsonl(self.ops, self.prep_wires)


@dataclass(frozen=True)
class PostselectedResult:
    """Kept-branch map, its probability for a maximally mixed input, and a flag."""

    map: DenseMap
    probability: float
    impossible: bool


def postselected_map(c: PostselectedCircuit, max_qubits: int = MAX_QUBITS) -> PostselectedResult:
    """Contract preparations and post-selections of ``c``.

    Each ancilla must be prepared exactly once before use and post-selected
    exactly once; ancillas are contracted as soon as they are post-selected,
    which keeps the live register small.
    """
    anc = range(c.n_wires, c.n_wires + c.n_ancillas)
    prepped = [0] * c.n_ancillas
    posted = [0] * c.n_ancillas
    for op in c.ops:
        if isinstance(op, Prep) and op.wire in anc:
            prepped[op.wire - c.n_wires] += 1
        if isinstance(op, Postselect) and op.wire in anc:
            posted[op.wire - c.n_wires] += 1
    if any(x != 1 for x in prepped) or any(x != 1 for x in posted):
        raise ValueError("every ancilla needs exactly one preparation and one post-selection")
    main_inputs = [w for w in range(c.n_wires) if w not in c.prep_wires]
    reg = Register(main_inputs, max_qubits=max_qubits)
    for w in sorted(c.prep_wires):
        reg.add(w)
    for op in c.ops:
        if isinstance(op, Prep):
            reg.add(op.wire)
        elif isinstance(op, Postselect):
            reg.project(op.wire, PLUS.conj())
        else:
            apply_gate(reg, op)
    dm = reg.to_map(list(range(c.n_wires)))
    if c.paths is not None:
        dm = DenseMap(dm.matrix, tuple(p[-1] for p in c.paths), tuple(c.paths[w][0] for w in main_inputs))
    n_in = len(main_inputs)
    prob = float(np.sum(np.abs(dm.matrix) ** 2) / 2**n_in)
    return PostselectedResult(dm, prob, bool(prob < 1e-24))


# Pauli-like operators -------------------------------------------------------------


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of Paulis on labelled qubits."""

    ops: tuple[tuple[Hashable, str], ...]
    sign: complex = 1

    @classmethod
    def from_sets(cls, x: Iterable[Hashable] = (), z: Iterable[Hashable] = (), sign: complex = 1) -> PauliString:
        """Build ``sign · X_x Z_z`` (X factors to the left of Z factors)."""
        xs, zs = set(x), set(z)
        ops = []
        phase = sign
        for q in sorted(xs | zs, key=repr):
            if q in xs and q in zs:
                ops.append((q, "Y"))
                phase *= -1j  # X Z = -i Y
            elif q in xs:
                ops.append((q, "X"))
            else:
                ops.append((q, "Z"))
        return cls(tuple(ops), phase)

    def matrix_on(self, labels: Sequence[Hashable]) -> np.ndarray:
        table = dict(self.ops)
        m = np.array([[1]], dtype=complex)
        for q in labels:
            m = np.kron(m, PAULI[table.get(q, "I")])
        return self.sign * m


@dataclass(frozen=True)
class ControlledPauli:
    """``|0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ P`` for a Pauli string ``P``."""

    control: Hashable
    pauli: PauliString

    def matrix_on(self, labels: Sequence[Hashable]) -> np.ndarray:
        others = [q for q in labels if q != self.control]
        p = self.pauli.matrix_on(others)
        full = np.zeros((2 ** len(labels), 2 ** len(labels)), dtype=complex)
        n = len(labels)
        ci = list(labels).index(self.control)
        for idx in range(2**n):
            bit = idx >> (n - 1 - ci) & 1
            rest = _drop_bit(idx, n, ci)
            for jdx in range(2**n):
                if (jdx >> (n - 1 - ci) & 1) != bit:
                    continue
                rj = _drop_bit(jdx, n, ci)
                full[idx, jdx] = p[rest, rj] if bit else float(rest == rj)
        return full


def _drop_bit(idx: int, n: int, pos: int) -> int:
    hi = idx >> (n - pos)
    lo = idx & ((1 << (n - 1 - pos)) - 1)
    return (hi << (n - 1 - pos)) | lo


def stabilizer_check(state: DenseMap, op: PauliString | ControlledPauli, tol: float = 1e-12) -> bool:
    """True iff ``op · state = state`` within ``tol`` (max norm)."""
    if state.matrix.shape[1] != 1:
        raise ValueError("state must be a column vector")
    labels = state.out_labels
    for q, _ in op.pauli.ops if isinstance(op, ControlledPauli) else op.ops:
        if q not in labels:
            raise ValueError(f"operator acts on unknown qubit {q!r}")
    m = op.matrix_on(labels)
    vec = state.matrix[:, 0]
    return bool(np.max(np.abs(m @ vec - vec)) < tol)
