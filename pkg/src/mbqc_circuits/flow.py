"""Flow and gflow: verification, search, layers and the delay order.

Partial orders are stored as layer partitions. Layer 0 holds the vertices
measured last (the outputs for a maximally delayed gflow) and ``u`` precedes
``v`` exactly when ``u`` sits in a higher-indexed layer.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from mbqc_circuits.graph import solve_gf2_bits

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from mbqc_circuits.graph import OpenGraph

Layers = tuple[frozenset[int], ...]


def _as_layers(layers: Iterable[Iterable[int]]) -> Layers:
    return tuple(frozenset(layer) for layer in layers)


def layer_index(layers: Sequence[frozenset[int]]) -> dict[int, int]:
    """Map each vertex to the index of its layer."""
    return {v: k for k, layer in enumerate(layers) for v in layer}


@dataclass(frozen=True)
class Flow:
    """Causal flow ``(f, ≺)``.

    Parameters
    ----------
    f : Mapping[int, int]
        Successor of each non-output vertex.
    layers : tuple[frozenset[int], ...]
        Ordered partition of the vertices, layer 0 measured last.
    """

    f: Mapping[int, int]
    layers: Layers

    def __post_init__(self) -> None:
        object.__setattr__(self, "f", dict(sorted(self.f.items())))
        object.__setattr__(self, "layers", _as_layers(self.layers))

    def precedes(self, u: int, v: int) -> bool:
        idx = layer_index(self.layers)
        return idx[u] > idx[v]


@dataclass(frozen=True)
class Gflow:
    """Generalised flow ``(g, ≺)``.

    Parameters
    ----------
    g : Mapping[int, frozenset[int]]
        Correcting set of each non-output vertex.
    layers : tuple[frozenset[int], ...]
        Ordered partition ``V_0, V_1, ...`` with ``V_0`` measured last.
    """

    g: Mapping[int, frozenset[int]]
    layers: Layers

    def __post_init__(self) -> None:
        object.__setattr__(self, "g", {v: frozenset(s) for v, s in sorted(self.g.items())})
        object.__setattr__(self, "layers", _as_layers(self.layers))

    @property
    def depth(self) -> int:
        """Number of layers minus one."""
        return len(self.layers) - 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "layers": [sorted(layer) for layer in self.layers],
            "g": {str(v): sorted(s) for v, s in self.g.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Gflow:
        extra = set(data) - {"layers", "g"}
        if extra:
            raise ValueError(f"unknown keys: {sorted(extra)}")
        return cls({int(k): frozenset(v) for k, v in data["g"].items()}, _as_layers(data["layers"]))


@dataclass(frozen=True)
class Violation:
    """One failed flow/gflow condition."""

    condition: str
    vertex: int
    other: int | None = None

    def __str__(self) -> str:
        tail = "" if self.other is None else f" -> {self.other}"
        return f"{self.condition} at {self.vertex}{tail}"


def _layer_problems(g: OpenGraph, layers: Sequence[frozenset[int]]) -> list[Violation]:
    out: list[Violation] = []
    seen: set[int] = set()
    for layer in layers:
        for v in sorted(layer):
            if v in seen:
                out.append(Violation("layers", v))
            seen.add(v)
    for v in g.vertices:
        if v not in seen:
            out.append(Violation("layers", v))
    for v in sorted(seen - set(g.vertices)):
        out.append(Violation("layers", v))
    return out


def verify_flow(g: OpenGraph, flow: Flow) -> list[Violation]:
    """Check conditions f-1, f-2 and f-3.

    Returns
    -------
    list of Violation
        Empty when ``flow`` is a valid flow of ``g``. Structural problems
        (missing or extra keys, bad layers) are reported as ``"domain"`` or
        ``"layers"`` violations.
    """
    out = _layer_problems(g, flow.layers)
    if out:
        return out
    idx = layer_index(flow.layers)
    non_out = g.non_outputs
    for v in sorted(non_out - set(flow.f)):
        out.append(Violation("domain", v))
    for u in sorted(set(flow.f) - non_out):
        out.append(Violation("domain", u))
    for u, fu in flow.f.items():
        if u not in non_out:
            continue
        if fu not in idx or fu in g.inputs:
            out.append(Violation("domain", u, fu))
            continue
        if not idx[u] > idx[fu]:
            out.append(Violation("f-1", u, fu))
        if not g.has_edge(u, fu):
            out.append(Violation("f-2", u, fu))
        for w in sorted(g.neighbors(fu)):
            if w != u and not idx[u] > idx[w]:
                out.append(Violation("f-3", u, w))
    return out


def verify_gflow(g: OpenGraph, gf: Gflow) -> list[Violation]:
    """Check conditions g-1, g-2 and g-3.

    Returns
    -------
    list of Violation
        Empty when ``gf`` is a valid gflow of ``g``.
    """
    out = _layer_problems(g, gf.layers)
    if out:
        return out
    idx = layer_index(gf.layers)
    non_out = g.non_outputs
    for v in sorted(non_out - set(gf.g)):
        out.append(Violation("domain", v))
    for u in sorted(set(gf.g) - non_out):
        out.append(Violation("domain", u))
    for u, gu in gf.g.items():
        if u not in non_out:
            continue
        if not gu <= g.non_inputs:
            out.append(Violation("domain", u))
            continue
        for v in sorted(gu):
            if not idx[u] > idx[v]:
                out.append(Violation("g-1", u, v))
        odd = g.odd(gu)
        if u not in odd:
            out.append(Violation("g-2", u))
        for v in sorted(odd):
            if v != u and not idx[u] > idx[v]:
                out.append(Violation("g-3", u, v))
    return out


def find_max_delayed_gflow(g: OpenGraph) -> Gflow | None:
    """Return the maximally delayed gflow of ``g``, or ``None`` if none exists.

    Layers are peeled from the outputs backwards. A vertex joins the next layer
    when some subset ``S`` of the already peeled non-input vertices has
    ``Odd(S)`` meeting the unpeeled vertices exactly in that vertex. Each
    ``S`` is the solution of a GF(2) system with free variables set to zero.
    """
    n = len(g.vertices)
    full = (1 << n) - 1
    adj = g._adj
    inputs = g.bits_of(g.inputs)
    done = g.bits_of(g.outputs)
    layers: list[frozenset[int]] = [frozenset(g.outputs)]
    corr: dict[int, frozenset[int]] = {}
    while done != full:
        cand_cols = [k for k in range(n) if (done & ~inputs) >> k & 1]
        rest = [k for k in range(n) if not done >> k & 1]
        # row r of the system: which candidate columns are adjacent to rest[r]
        rows = []
        for r in rest:
            bits = 0
            for c_pos, c in enumerate(cand_cols):
                if adj[c] >> r & 1:
                    bits |= 1 << c_pos
            rows.append(bits)
        new_bits = 0
        for target_pos, v in enumerate(rest):
            rhs = [1 if k == target_pos else 0 for k in range(len(rest))]
            x = solve_gf2_bits(rows, rhs)
            if x is None:
                continue
            new_bits |= 1 << v
            corr[g.vertices[v]] = frozenset(g.vertices[c] for pos, c in enumerate(cand_cols) if x >> pos & 1)
        if not new_bits:
            return None
        layers.append(g.vset_from_bits(new_bits).ids())
        done |= new_bits
    return Gflow(corr, tuple(layers))


def _minimal_flow_order_ok(g: OpenGraph, f: Mapping[int, int]) -> Layers | None:
    """Layers of the coarsest order compatible with ``f``, or ``None`` if cyclic."""
    succ: dict[int, set[int]] = {v: set() for v in g.vertices}
    for u, fu in f.items():
        succ[u].add(fu)
        for w in g.neighbors(fu):
            if w != u:
                succ[u].add(w)
    return _layers_from_relation(g.vertices, succ)


def _layers_from_relation(vertices: Iterable[int], succ: Mapping[int, set[int]]) -> Layers | None:
    """Max-peeling of the transitive closure of ``u ≺ v`` for ``v`` in ``succ[u]``."""
    remaining = set(vertices)
    layers: list[frozenset[int]] = []
    while remaining:
        top = frozenset(v for v in remaining if not (succ[v] & remaining))
        if not top:
            return None
        layers.append(top)
        remaining -= top
    return tuple(layers)


def find_flow(g: OpenGraph) -> Flow | None:
    """Search for a causal flow by backtracking over neighbour choices.

    Non-outputs are assigned in ascending id order and candidate successors
    are tried in ascending id order, so the result is deterministic. Each
    complete, injective assignment is accepted once its induced order is
    acyclic and :func:`verify_flow` reports no violation.
    """
    todo = sorted(g.non_outputs)
    choices = {u: sorted(w for w in g.neighbors(u) if w not in g.inputs) for u in todo}
    f: dict[int, int] = {}
    used: set[int] = set()

    def rec(k: int) -> Flow | None:
        if k == len(todo):
            layers = _minimal_flow_order_ok(g, f)
            if layers is None:
                return None
            flow = Flow(dict(f), layers)
            return flow if not verify_flow(g, flow) else None
        u = todo[k]
        for w in choices[u]:
            if w in used:
                continue
            f[u] = w
            used.add(w)
            found = rec(k + 1)
            if found is not None:
                return found
            used.discard(w)
            del f[u]
        return None

    return rec(0)


class Delay(enum.Enum):
    """Outcome of :func:`compare_delay`."""

    MORE_DELAYED = "more_delayed"
    LESS_DELAYED = "less_delayed"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def cumulative_sizes(layers: Sequence[frozenset[int]], length: int) -> list[int]:
    """Prefix sums of layer sizes, padded to ``length`` entries."""
    out, acc = [], 0
    for k in range(length):
        if k < len(layers):
            acc += len(layers[k])
        out.append(acc)
    return out


def compare_delay(a: Gflow, b: Gflow) -> Delay:
    """Compare two gflows of one open graph by cumulative layer sizes.

    Raises
    ------
    ValueError
        If the layers of ``a`` and ``b`` cover different vertex sets.
    """
    va = frozenset().union(*a.layers)
    vb = frozenset().union(*b.layers)
    if va != vb or set(a.g) != set(b.g):
        raise ValueError("gflows belong to different open graphs")
    length = max(len(a.layers), len(b.layers))
    ca, cb = cumulative_sizes(a.layers, length), cumulative_sizes(b.layers, length)
    ge = all(x >= y for x, y in zip(ca, cb))
    le = all(x <= y for x, y in zip(ca, cb))
    if ge and le:
        return Delay.EQUAL
    if ge:
        return Delay.MORE_DELAYED
    if le:
        return Delay.LESS_DELAYED
    return Delay.INCOMPARABLE
