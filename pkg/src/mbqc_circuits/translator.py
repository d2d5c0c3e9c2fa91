"""Pattern-to-circuit compilers.

Two forward routes are provided: the star pattern transformation for graphs
with flow, and the layer-by-layer gflow translation that rewrites each layer
into a flow layer by CNOT conjugation of the outputs. The reverse direction
turns a J/CZ circuit back into a pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from mbqc_circuits.circuit import CX, CZ, Circuit, Gate, J, Segment
from mbqc_circuits.flow import Flow, _layers_from_relation, find_max_delayed_gflow, layer_index
from mbqc_circuits.graph import OpenGraph
from mbqc_circuits.pathcover import (
    InternalConsistencyError,
    MatchingGflow,
    NoGflowError,
    PathCover,
    assemble_paths,
    build_matching_gflow,
    reduce_outputs,
)

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from mbqc_circuits.flow import Gflow, Layers


@dataclass(frozen=True)
class MeasurementPattern:
    """Open graph with measurement angles and a measurement order.

    Parameters
    ----------
    graph : OpenGraph
    angles : Mapping[int, float]
        Angle ``α_v`` in radians for every non-output.
    order : tuple[frozenset[int], ...]
        Layers of a flow or gflow, layer 0 measured last.
    """

    graph: OpenGraph
    angles: Mapping[int, float]
    order: Layers = ()

    def __post_init__(self) -> None:
        missing = self.graph.non_outputs - set(self.angles)
        if missing:
            raise ValueError(f"missing angles for {sorted(missing)}")
        object.__setattr__(self, "angles", {v: float(self.angles[v]) for v in sorted(self.graph.non_outputs)})

    @classmethod
    def with_gflow(cls, graph: OpenGraph, angles: Mapping[int, float]) -> MeasurementPattern:
        """Attach the maximally delayed gflow order; raise if there is none."""
        gf = find_max_delayed_gflow(graph)
        if gf is None:
            raise NoGflowError()
        return cls(graph, angles, gf.layers)


def _wiring(g: OpenGraph, cover: PathCover) -> tuple[dict[int, int], dict[int, int], frozenset[int]]:
    wire_of = cover.path_of()
    pred = {b: a for a, b in cover.successor().items()}
    preps = frozenset(w for w, p in enumerate(cover.paths) if p[0] not in g.inputs)
    return wire_of, pred, preps


# SPT for flow --------------------------------------------------------------------


def flow_path_cover(g: OpenGraph, f: Mapping[int, int]) -> PathCover:
    """Paths ``v, f(v), f(f(v)), ...`` ordered by end vertex."""
    return assemble_paths(g.vertices, f)


def position_relation(g: OpenGraph, cover: PathCover) -> dict[int, set[int]]:
    """Generators of ``≺_p`` on positions ``v!`` (keyed by ``v``).

    Along a wire ``pred(v)! ≺_p v!``. A CZ at ``(a!, b!)`` is simultaneous on
    both wires, so it also forces ``pred(a)! ≺_p b!`` and ``pred(b)! ≺_p a!``.
    """
    succ = cover.successor()
    pred = {b: a for a, b in succ.items()}
    rel: dict[int, set[int]] = {v: set() for v in g.vertices}
    for a, b in succ.items():
        rel[a].add(b)
    for a, b in g.edges:
        if succ.get(a) == b or succ.get(b) == a:
            continue
        if a in pred:
            rel[pred[a]].add(b)
        if b in pred:
            rel[pred[b]].add(a)
    return rel


def transitive_closure(rel: Mapping[int, set[int]]) -> dict[int, frozenset[int]]:
    out: dict[int, frozenset[int]] = {}
    for v in rel:
        seen: set[int] = set()
        stack = list(rel[v])
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            stack.extend(rel.get(x, ()))
        out[v] = frozenset(seen)
    return out


def _sequence(
    n_wires: int,
    j_order: Sequence[int],
    angles: Mapping[int, float],
    wire_of: Mapping[int, int],
    pred: Mapping[int, int],
    czs: Sequence[tuple[int, int]],
) -> list[Gate]:
    """Interleave J gates in ``j_order`` with CZs placed at positions ``(u!, v!)``.

    A CZ is emitted right after the later of the J gates that open its two
    positions; it must precede both J gates that close them.
    """
    step = {v: k for k, v in enumerate(j_order)}
    buckets: list[list[tuple[tuple[int, int], Gate]]] = [[] for _ in range(len(j_order) + 1)]
    for u, v in czs:
        lo = max(step[pred[u]] if u in pred else -1, step[pred[v]] if v in pred else -1)
        hi = min(step.get(u, len(j_order)), step.get(v, len(j_order)))
        if not lo < hi:
            raise InternalConsistencyError(f"CZ at ({u}!, {v}!) is not realizable in this order")
        buckets[lo + 1].append(((min(u, v), max(u, v)), CZ(wire_of[u], wire_of[v])))
    gates: list[Gate] = []
    for k in range(len(j_order) + 1):
        gates.extend(gate for _, gate in sorted(buckets[k], key=lambda t: t[0]))
        if k < len(j_order):
            v = j_order[k]
            gates.append(J(wire_of[v], angles[v], v))
    return gates


def spt_flow(p: MeasurementPattern, f: Flow) -> Circuit:
    """Star pattern transformation of a pattern with flow.

    Paths ``v -> f(v)`` become wires, each measured vertex a ``J(α_v)`` gate,
    and each non-path edge a CZ between its two positions. J gates are emitted
    deepest layer first, then by ascending id.

    Raises
    ------
    InternalConsistencyError
        If the induced position relation is cyclic.
    """
    g = p.graph
    cover = flow_path_cover(g, f.f)
    rel = position_relation(g, cover)
    if _layers_from_relation(g.vertices, rel) is None:
        raise InternalConsistencyError("position relation is cyclic")
    wire_of, pred, preps = _wiring(g, cover)
    idx = layer_index(f.layers)
    j_order = sorted(g.non_outputs, key=lambda v: (-idx[v], v))
    succ = cover.successor()
    czs = [(a, b) for a, b in g.edges if succ.get(a) != b and succ.get(b) != a]
    gates = _sequence(len(cover.paths), j_order, p.angles, wire_of, pred, czs)
    return Circuit(len(cover.paths), tuple(gates), preps, cover.paths)


def circuit_to_pattern(c: Circuit) -> MeasurementPattern:
    """Reverse SPT: one vertex per wire segment, one edge per CZ.

    Each J gate ends the current vertex of its wire (which takes the angle) and
    starts a new one joined to it by a path edge. Non-output vertices are
    numbered in creation order and outputs follow in wire order, so the path
    cover of the result lists the wires in their original order.

    Raises
    ------
    ValueError
        If ``c`` contains anything other than J and CZ gates.
    """
    return reverse_spt(c)[0]


def reverse_spt(c: Circuit) -> tuple[MeasurementPattern, Flow]:
    """:func:`circuit_to_pattern` together with the flow given by the wires."""
    cur = list(range(c.n_wires))
    nxt = c.n_wires
    angles: dict[int, float] = {}
    f: dict[int, int] = {}
    czs: set[tuple[int, int]] = set()
    created = list(range(c.n_wires))
    for gate in c.gates:
        if isinstance(gate, J):
            old = cur[gate.wire]
            angles[old] = gate.angle
            f[old] = nxt
            cur[gate.wire] = nxt
            created.append(nxt)
            nxt += 1
        elif isinstance(gate, CZ):
            e = (min(cur[gate.a], cur[gate.b]), max(cur[gate.a], cur[gate.b]))
            czs.symmetric_difference_update({e})
        else:
            raise ValueError(f"unsupported gate {gate!r}: only J and CZ can be turned into a pattern")
    outputs = set(cur)
    order = [v for v in created if v not in outputs] + cur
    relabel = {v: k for k, v in enumerate(order)}
    edges = [(relabel[a], relabel[b]) for a, b in [*f.items(), *czs]]
    g = OpenGraph.create(
        range(len(order)),
        edges,
        [relabel[w] for w in c.input_wires],
        [relabel[v] for v in cur],
    )
    flow_map = {relabel[a]: relabel[b] for a, b in f.items()}
    layers = _layers_from_relation(g.vertices, flow_generators(g, flow_map))
    if layers is None:
        raise InternalConsistencyError("reverse transformation produced a cyclic order")
    pattern = MeasurementPattern(g, {relabel[v]: a for v, a in angles.items()}, layers)
    return pattern, Flow(flow_map, layers)


def flow_generators(g: OpenGraph, f: Mapping[int, int]) -> dict[int, set[int]]:
    """``u ≺ f(u)`` and ``u ≺ w`` for every ``w ∈ N(f(u))`` other than ``u``."""
    rel: dict[int, set[int]] = {v: set() for v in g.vertices}
    for u, fu in f.items():
        rel[u].add(fu)
        rel[u] |= g.neighbors(fu) - {u}
    return rel


# graph sequence and the gflow translation ------------------------------------------


@dataclass(frozen=True)
class GraphSequence:
    """Graphs ``G' = G_0, G_1, ..., G_n`` of one layer and the output Clifford.

    Attributes
    ----------
    graphs : tuple[OpenGraph, ...]
        ``G_0`` is the layer graph without output-output edges; ``G_i`` has
        every edge at ``h(v_i)`` replaced by edges to ``Odd_{G'}(g_V(v_i))``.
    conjugators : tuple[tuple[tuple[int, int], ...], ...]
        Per step, the vertex-level CNOTs ``h(v_i) -> w`` for ``w`` in
        ``g_V(v_i) ⊕ h(v_i)``.
    oo_edges : tuple[tuple[int, int], ...]
        Output-output edges removed from ``G``.
    order : tuple[int, ...]
        ``v_1, ..., v_n``.
    """

    graphs: tuple[OpenGraph, ...]
    conjugators: tuple[tuple[tuple[int, int], ...], ...]
    oo_edges: tuple[tuple[int, int], ...]
    order: tuple[int, ...]

    @property
    def u_o(self) -> tuple[tuple[str, int, int], ...]:
        """Output Clifford in time order: CNOTs of steps ``n .. 1``, then output CZs."""
        out: list[tuple[str, int, int]] = []
        for step in reversed(self.conjugators):
            out.extend(("CX", c, t) for c, t in step)
        out.extend(("CZ", a, b) for a, b in self.oo_edges)
        return tuple(out)


def cross_edges(g: OpenGraph, succ: Mapping[int, int]) -> frozenset[tuple[int, int]]:
    """Edges of ``g`` that are not path arcs of ``succ``."""
    return frozenset(e for e in g.edges if succ.get(e[0]) != e[1] and succ.get(e[1]) != e[0])


def strip_output_edges(g: OpenGraph) -> OpenGraph:
    return g.with_edges(e for e in g.edges if not (e[0] in g.outputs and e[1] in g.outputs))


def build_graph_sequence(g: OpenGraph, mg: MatchingGflow) -> GraphSequence:
    """Apply the per-vertex edge rewrite at ``h(v_i)`` for ``i = 1 .. n``."""
    g0 = strip_output_edges(g)
    oo = tuple(e for e in g.edges if e[0] in g.outputs and e[1] in g.outputs)
    graphs = [g0]
    conj = []
    edges = set(g0.edges)
    for v in mg.order:
        r = mg.h[v]
        target = g0.odd(mg.g_v[v])
        edges = {e for e in edges if r not in e}
        edges |= {(min(r, w), max(r, w)) for w in target}
        graphs.append(g0.with_edges(sorted(edges)))
        conj.append(tuple((r, w) for w in sorted(mg.g_v[v] - {r})))
    return GraphSequence(tuple(graphs), tuple(conj), oo, mg.order)


@dataclass(frozen=True)
class LayerRound:
    """Everything the gflow translation computes for one layer."""

    graph: OpenGraph
    gflow: Gflow
    matching: MatchingGflow
    sequence: GraphSequence


def translation_rounds(g: OpenGraph) -> tuple[list[LayerRound], OpenGraph]:
    """Matching rounds run on graphs without output-output edges.

    Returns the rounds (shallowest layer first) and the residual all-output
    graph whose edges act before every measurement.
    """
    gmax = find_max_delayed_gflow(g)
    if gmax is None:
        raise NoGflowError()
    rounds = []
    cur_g, cur_f = g, gmax
    while cur_g.non_outputs:
        mg = build_matching_gflow(cur_g, cur_f)
        seq = build_graph_sequence(cur_g, mg)
        rounds.append(LayerRound(cur_g, cur_f, mg, seq))
        cur_g, cur_f = reduce_outputs(strip_output_edges(cur_g), cur_f, mg.r)
    return rounds, cur_g


def translate_gflow_pattern(p: MeasurementPattern) -> Circuit:
    """Layer-by-layer translation of a pattern with gflow into a circuit.

    For the last-measured layer ``v_1 .. v_n`` the measured part is emitted in
    time order ``J(α_{v_n})``, CZs from ``v_n``'s wire to the wires of
    ``Odd_{G'}(g_V(v_n)) \\ {v_n}``, ``J(α_{v_{n-1}})``, ... , ``J(α_{v_1})``,
    followed by the output Clifford. Deeper layers act earlier in time, so the
    per-layer blocks are concatenated in reverse.

    Raises
    ------
    NoGflowError
        If the graph has no gflow.
    """
    g = p.graph
    rounds, residual = translation_rounds(g)
    arcs: dict[int, int] = {}
    for rnd in rounds:
        arcs.update(rnd.matching.h)
    cover = assemble_paths(g.vertices, arcs)
    wire_of, _, preps = _wiring(g, cover)
    blocks: list[tuple[str, int, list[Gate]]] = []
    for k, rnd in enumerate(rounds, start=1):
        g0 = rnd.sequence.graphs[0]
        spt: list[Gate] = []
        for v in reversed(rnd.matching.order):
            spt.append(J(wire_of[v], p.angles[v], v))
            for w in sorted(g0.odd(rnd.matching.g_v[v]) - {v}):
                spt.append(CZ(wire_of[v], wire_of[w]))
        uo: list[Gate] = []
        for kind, a, b in rnd.sequence.u_o:
            uo.append(CX(wire_of[a], wire_of[b]) if kind == "CX" else CZ(wire_of[a], wire_of[b]))
        blocks.append(("uo", k, uo))
        blocks.append(("spt", k, spt))
    blocks.append(("uo", len(rounds) + 1, [CZ(wire_of[a], wire_of[b]) for a, b in residual.edges]))
    gates: list[Gate] = []
    segments = []
    for kind, k, block in reversed(blocks):
        segments.append(Segment(kind, k, len(gates), len(gates) + len(block)))
        gates.extend(block)
    return Circuit(len(cover.paths), tuple(gates), preps, cover.paths, tuple(segments))


# J parallelisation -------------------------------------------------------------------


class NotReducibleError(ValueError):
    """Raised when a layer block does not have the expected J/CZ shape."""


@dataclass(frozen=True)
class JLayer:
    """Simultaneous J gates followed by a CZ/CNOT block."""

    index: int
    js: tuple[J, ...]
    clifford: tuple[Gate, ...]


@dataclass(frozen=True)
class LayeredCircuit:
    """``initial`` Clifford, then J-layers ``d, d-1, ..., 0`` each with its Clifford.

    The block contents are described in :func:`parallelize_j`.
    """

    n_wires: int
    prep_wires: frozenset[int]
    paths: tuple[tuple[int, ...], ...] | None
    initial: tuple[Gate, ...]
    layers: tuple[JLayer, ...]

    def gates(self) -> tuple[Gate, ...]:
        out: list[Gate] = list(self.initial)
        for layer in self.layers:
            out.extend(layer.js)
            out.extend(layer.clifford)
        return tuple(out)

    def to_circuit(self) -> Circuit:
        return Circuit(self.n_wires, self.gates(), self.prep_wires, self.paths)


def push_j_forward(block: Sequence[Gate]) -> tuple[list[J], list[Gate]]:
    """Move every J of ``block`` to the start using ``J_v CZ_{u,v} = CX_{u→v} J_v``.

    Raises
    ------
    NotReducibleError
        If a J would have to pass a CNOT or a second J on its wire.
    """
    js: list[J] = []
    rest: list[Gate] = []
    for gate in block:
        if isinstance(gate, J):
            if any(j.wire == gate.wire for j in js):
                raise NotReducibleError(f"two J gates on wire {gate.wire} in one layer")
            new_rest: list[Gate] = []
            for other in rest:
                if gate.wire not in other.wires:
                    new_rest.append(other)
                elif isinstance(other, CZ):
                    u = other.a if other.b == gate.wire else other.b
                    new_rest.append(CX(u, gate.wire))
                else:
                    raise NotReducibleError(f"J on wire {gate.wire} cannot pass {other}")
            rest = new_rest
            js.append(gate)
        elif isinstance(gate, (CZ, CX)):
            rest.append(gate)
        else:
            raise NotReducibleError(f"unexpected gate {gate!r}")
    return js, rest


def parallelize_j(c: Circuit) -> LayeredCircuit:
    """Rewrite each measured block into one J-layer followed by a Clifford block.

    ``c`` must carry the segments recorded by :func:`translate_gflow_pattern`.
    With depth ``d`` the result has J-layers ``d, ..., 1, 0``: J-layer ``k``
    (``k >= 1``) is followed by the converted CZs of layer ``k`` and, for
    ``k >= 2``, the output Clifford of round ``k``; J-layer ``0`` is empty
    because outputs are not measured, and its Clifford is the final output
    Clifford of round 1.

    Raises
    ------
    NotReducibleError
        If the segments are missing or a block does not have the expected shape.
    """
    if not c.segments:
        if any(isinstance(gate, J) for gate in c.gates):
            raise NotReducibleError("circuit carries no layer segments")
        return LayeredCircuit(c.n_wires, c.prep_wires, c.paths, (), (JLayer(0, (), tuple(c.gates)),))
    segs = list(c.segments)
    if segs[-1].stop != len(c.gates) or segs[0].start != 0:
        raise NotReducibleError("segments do not cover the circuit")
    head = segs[0]
    if head.kind != "uo":
        raise NotReducibleError("circuit must start with the residual output block")
    depth = head.layer - 1
    initial = tuple(c.gates[head.start : head.stop])
    body = segs[1:]
    if len(body) != 2 * depth:
        raise NotReducibleError("unexpected number of segments")
    layers: list[JLayer] = []
    for pos in range(depth):
        spt, uo = body[2 * pos], body[2 * pos + 1]
        k = depth - pos
        if spt.kind != "spt" or uo.kind != "uo" or spt.layer != k or uo.layer != k:
            raise NotReducibleError("segments are out of order")
        js, rest = push_j_forward(c.gates[spt.start : spt.stop])
        tail = tuple(c.gates[uo.start : uo.stop]) if k >= 2 else ()
        layers.append(JLayer(k, tuple(sorted(js, key=lambda j: j.wire)), tuple(rest) + tail))
    final = tuple(c.gates[body[-1].start : body[-1].stop]) if depth else ()
    layers.append(JLayer(0, (), final))
    return LayeredCircuit(c.n_wires, c.prep_wires, c.paths, initial, tuple(layers))
