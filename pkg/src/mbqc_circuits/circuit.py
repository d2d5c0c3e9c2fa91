"""Gate and circuit data types, JSON-lines serialisation and normal forms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Union

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence


@dataclass(frozen=True)
class J:
    """``J(α) = H · diag(1, e^{-iα})`` on one wire; ``vertex`` is the measured vertex."""

    wire: int
    angle: float
    vertex: int | None = field(default=None, compare=False)

    @property
    def wires(self) -> tuple[int, ...]:
        return (self.wire,)


@dataclass(frozen=True)
class H:
    """Hadamard gate."""

    wire: int

    @property
    def wires(self) -> tuple[int, ...]:
        return (self.wire,)


@dataclass(frozen=True)
class CZ:
    """Controlled-Z; the two wires are stored in ascending order."""

    a: int
    b: int

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError("CZ needs two distinct wires")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def wires(self) -> tuple[int, ...]:
        return (self.a, self.b)


@dataclass(frozen=True)
class CX:
    """CNOT with ``control`` and ``target`` wires."""

    control: int
    target: int

    def __post_init__(self) -> None:
        if self.control == self.target:
            raise ValueError("CX needs two distinct wires")

    @property
    def wires(self) -> tuple[int, ...]:
        return (self.control, self.target)


@dataclass(frozen=True)
class Prep:
    """Preparation of ``|+⟩`` on a wire."""

    wire: int


@dataclass(frozen=True)
class Postselect:
    """Projection of a wire onto ``⟨+|``, removing it."""

    wire: int


Gate = Union[J, H, CZ, CX]
Op = Union[J, H, CZ, CX, Prep, Postselect]


@dataclass(frozen=True)
class Segment:
    """A labelled slice ``gates[start:stop]`` of a circuit.

    ``kind`` is ``"spt"`` for the measured part of one layer or ``"uo"`` for
    the output Clifford of that layer; ``layer`` is the original layer index.
    """

    kind: str
    layer: int
    start: int
    stop: int


@dataclass(frozen=True)
class Circuit:
    """Ordinary (time-ordered) circuit.

    Parameters
    ----------
    n_wires : int
        Number of wires.
    gates : tuple of Gate
        Gates in time order.
    prep_wires : frozenset[int]
        Wires starting in ``|+⟩``; the rest carry the map's inputs.
    paths : tuple[tuple[int, ...], ...] or None
        Path-cover path of each wire, when the circuit came from a graph.
    segments : tuple of Segment
        Per-layer block boundaries recorded by the translator.
    """

    n_wires: int
    gates: tuple[Gate, ...]
    prep_wires: frozenset[int] = frozenset()
    paths: tuple[tuple[int, ...], ...] | None = None
    segments: tuple[Segment, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "prep_wires", frozenset(self.prep_wires))
        for gate in self.gates:
            if any(not 0 <= w < self.n_wires for w in gate.wires):
                raise ValueError(f"gate {gate} acts outside the {self.n_wires} wires")

    @property
    def input_wires(self) -> tuple[int, ...]:
        return tuple(w for w in range(self.n_wires) if w not in self.prep_wires)

    def in_labels(self) -> tuple[int, ...]:
        """Labels of the input legs: path start vertices when known."""
        if self.paths is None:
            return self.input_wires
        return tuple(self.paths[w][0] for w in self.input_wires)

    def out_labels(self) -> tuple[int, ...]:
        """Labels of the output legs: path end vertices when known."""
        if self.paths is None:
            return tuple(range(self.n_wires))
        return tuple(p[-1] for p in self.paths)

    def to_jsonl(self) -> str:
        return circuit_to_jsonl(self.gates, self.prep_wires)

    def diagram(self) -> str:
        return text_diagram(self.n_wires, self.gates, self.prep_wires)


def _angle_json(a: float) -> float:
    # normalise -0.0 and keep full precision for byte-stable output
    return 0.0 if a == 0 else float(a)


def op_to_record(op: Op) -> dict[str, Any]:
    if isinstance(op, J):
        return {"gate": "J", "wire": op.wire, "angle": _angle_json(op.angle)}
    if isinstance(op, H):
        return {"gate": "H", "wire": op.wire}
    if isinstance(op, CZ):
        return {"gate": "CZ", "wires": [op.a, op.b]}
    if isinstance(op, CX):
        return {"gate": "CX", "control": op.control, "target": op.target}
    if isinstance(op, Prep):
        return {"prep": "+", "wire": op.wire}
    if isinstance(op, Postselect):
        return {"postselect": "+", "wire": op.wire}
    raise TypeError(f"not a circuit operation: {op!r}")


def record_to_op(rec: dict[str, Any]) -> Op:
    if "prep" in rec:
        return Prep(int(rec["wire"]))
    if "postselect" in rec:
        return Postselect(int(rec["wire"]))
    kind = rec.get("gate")
    if kind == "J":
        return J(int(rec["wire"]), float(rec["angle"]))
    if kind == "H":
        return H(int(rec["wire"]))
    if kind == "CZ":
        a, b = rec["wires"]
        return CZ(int(a), int(b))
    if kind == "CX":
        return CX(int(rec["control"]), int(rec["target"]))
    raise ValueError(f"unsupported gate record {rec!r}")


def circuit_to_jsonl(ops: Iterable[Op], prep_wires: Iterable[int] = ()) -> str:
    lines = [json.dumps(op_to_record(Prep(w))) for w in sorted(prep_wires)]
    lines += [json.dumps(op_to_record(op)) for op in ops]
    return "\n".join(lines) + ("\n" if lines else "")


def circuit_from_jsonl(text: str) -> Circuit:
    """Parse JSON lines into a :class:`Circuit` (J, H, CZ, CX and preps)."""
    preps: set[int] = set()
    gates: list[Gate] = []
    top = -1
    for line in text.splitlines():
        if not line.strip():
            continue
        op = record_to_op(json.loads(line))
        if isinstance(op, Prep):
            preps.add(op.wire)
            top = max(top, op.wire)
        elif isinstance(op, Postselect):
            raise ValueError("postselection is not allowed in an ordinary circuit")
        else:
            gates.append(op)
            top = max([top, *op.wires])
    return Circuit(top + 1, tuple(gates), frozenset(preps))


def _fmt_angle(a: float) -> str:
    k = a / math.pi
    for n in (1, 2, 3, 4, 5, 6, 7, 8, 12, 14, 16):
        if abs(k * n - round(k * n)) < 1e-12:
            num = round(k * n)
            if num == 0:
                return "0"
            head = "" if num == 1 else ("-" if num == -1 else f"{num}")
            return f"{head}π" + ("" if n == 1 else f"/{n}")
    return f"{a:.4f}"


def text_diagram(n_wires: int, gates: Sequence[Gate], prep_wires: Iterable[int] = ()) -> str:
    """Plain-text diagram: one row per wire, one column per gate."""
    preps = set(prep_wires)
    rows = [[f"w{w}: " + ("|+>" if w in preps else "   ")] for w in range(n_wires)]
    for gate in gates:
        cells = ["-" for _ in range(n_wires)]
        if isinstance(gate, J):
            cells[gate.wire] = f"J({_fmt_angle(gate.angle)})"
        elif isinstance(gate, H):
            cells[gate.wire] = "H"
        elif isinstance(gate, CZ):
            cells[gate.a] = cells[gate.b] = "●"
            for w in range(gate.a + 1, gate.b):
                cells[w] = "│"
        elif isinstance(gate, CX):
            cells[gate.control], cells[gate.target] = "●", "⊕"
            lo, hi = sorted((gate.control, gate.target))
            for w in range(lo + 1, hi):
                cells[w] = "│"
        width = max(len(c) for c in cells)
        for w in range(n_wires):
            cell = cells[w]
            pad = ("-" if cell in ("-", "●", "⊕", "H") or cell.startswith("J") else " ")
            rows[w].append("-" + cell.center(width, pad if cell != "│" else "-") + "-")
    return "\n".join("".join(r) for r in rows) + "\n"


# commutation normal form ------------------------------------------------------


def _commute(x: Gate, y: Gate) -> bool:
    shared = set(x.wires) & set(y.wires)
    if not shared:
        return True
    if isinstance(x, (J, H)) or isinstance(y, (J, H)):
        return False
    if isinstance(x, CZ) and isinstance(y, CZ):
        return True
    if isinstance(x, CZ) and isinstance(y, CX):
        return y.target not in x.wires
    if isinstance(x, CX) and isinstance(y, CZ):
        return x.target not in y.wires
    assert isinstance(x, CX) and isinstance(y, CX)
    return x.control != y.target and y.control != x.target


def _key(g: Gate) -> tuple[Any, ...]:
    if isinstance(g, J):
        return (0, g.wire, round(g.angle, 12))
    if isinstance(g, H):
        return (1, g.wire)
    if isinstance(g, CZ):
        return (2, g.a, g.b)
    return (3, g.control, g.target)


def normal_form(gates: Sequence[Gate]) -> tuple[tuple[Any, ...], ...]:
    """Canonical representative of ``gates`` modulo swaps of adjacent commuting gates.

    Builds the dependency order between non-commuting gates and emits the
    lexicographically least topological order of gate keys.
    """
    n = len(gates)
    preds = [set() for _ in range(n)]
    for j in range(n):
        for i in range(j):
            if not _commute(gates[i], gates[j]):
                preds[j].add(i)
    done: set[int] = set()
    out = []
    while len(done) < n:
        ready = [k for k in range(n) if k not in done and preds[k] <= done]
        k = min(ready, key=lambda k: (_key(gates[k]), k))
        done.add(k)
        out.append(_key(gates[k]))
    return tuple(out)


def gate_multiset(gates: Iterable[Gate]) -> tuple[tuple[Any, ...], ...]:
    return tuple(sorted(_key(g) for g in gates))
