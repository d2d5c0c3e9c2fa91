"""Matching gflow, output reduction and path covers for graphs with gflow.

A round pairs the penultimate layer ``V_1`` with a subset ``R`` of the outputs
along real gflow edges, then deletes ``R`` and promotes ``V_1`` to outputs.
Repeating rounds until only outputs remain yields a path cover whose arcs are
the recorded matchings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from mbqc_circuits.flow import Gflow, find_max_delayed_gflow
from mbqc_circuits.graph import is_basis, solve_gf2_bits

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from mbqc_circuits.graph import OpenGraph


class NoGflowError(ValueError):
    """Raised when a construction needs a gflow the graph does not have."""

    def __init__(self) -> None:
        super().__init__("graph has no gflow")


class InternalConsistencyError(RuntimeError):
    """Raised when a construction that is guaranteed to succeed does not."""


@dataclass(frozen=True)
class Provenance:
    """Data recorded while matching one vertex ``v_m``.

    Attributes
    ----------
    u : frozenset[int]
        Earlier vertices whose correcting sets were added, ``U_m``.
    o : frozenset[int]
        The resulting output set ``O_m``, which becomes ``g_V(v_m)``.
    """

    u: frozenset[int]
    o: frozenset[int]


@dataclass(frozen=True)
class MatchingGflow:
    """Modified gflow of one round together with its successor function.

    Attributes
    ----------
    order : tuple[int, ...]
        ``v_1, ..., v_l``: the penultimate layer in processing order.
    g_v : dict[int, frozenset[int]]
        Correcting sets; equal to the input gflow outside ``order``.
    h : dict[int, int]
        Successor ``v -> r_v`` for ``v`` in ``order``.
    r : frozenset[int]
        Matched outputs ``R_V``.
    provenance : dict[int, Provenance]
        ``U_m`` and ``O_m`` per matched vertex.
    layers : tuple[frozenset[int], ...]
        Layers of the input maximally delayed gflow.
    base : Gflow
        The input maximally delayed gflow.
    """

    order: tuple[int, ...]
    g_v: dict[int, frozenset[int]]
    h: dict[int, int]
    r: frozenset[int]
    provenance: dict[int, Provenance]
    layers: tuple[frozenset[int], ...]
    base: Gflow

    def order_relation(self) -> dict[int, set[int]]:
        """Successor sets of the strict order ``≺_V`` restricted to ``V_1 ∪ O``.

        ``v_m ≺_V u`` for every ``u`` in ``U_m`` and every output, closed
        transitively.
        """
        rel: dict[int, set[int]] = {v: set(self.layers[0]) for v in self.order}
        for v in self.order:
            rel[v] |= set(self.provenance[v].u)
        changed = True
        while changed:
            changed = False
            for v in self.order:
                extra = set().union(*(rel.get(u, set()) for u in rel[v])) - rel[v]
                if extra:
                    rel[v] |= extra
                    changed = True
        return rel


def matching_violations(g: OpenGraph, mg: MatchingGflow) -> list[str]:
    """Independent check of R-a .. R-d and the real-edge property."""
    out: list[str] = []
    v1 = frozenset(mg.order)
    if len(mg.r) != len(v1):
        out.append("R-a")
    fam = [g.vset(mg.base.g[v]) for v in mg.order]
    if not is_basis(fam, g.vset(mg.r)):
        out.append("R-b")
    if set(mg.h) != set(v1) or frozenset(mg.h.values()) != mg.r or len(set(mg.h.values())) != len(v1):
        out.append("R-c bijection")
    for v, r in mg.h.items():
        if not g.has_edge(v, r) or r not in mg.g_v[v]:
            out.append(f"R-c edge {v}->{r}")
    # R-d at the induction step that fixed v; later steps only shrink V_1 \ V
    for v in mg.order:
        if g.odd(mg.g_v[v]) & (v1 - _prefix(mg.order, v)):
            out.append(f"R-d {v}")
    return out


def _prefix(order: Sequence[int], v: int) -> frozenset[int]:
    return frozenset(order[: order.index(v) + 1])


def build_matching_gflow(g: OpenGraph, gmax: Gflow) -> MatchingGflow:
    """Construct the matching gflow of the penultimate layer.

    The layer is processed in ascending id order. For each new vertex the
    earlier correcting sets that cancel its overlap with the matched outputs
    are found with a GF(2) solve; the combined set becomes its new correcting
    set, and its lowest adjacent member becomes the successor.

    Raises
    ------
    InternalConsistencyError
        If the penultimate layer is empty, no adjacent successor exists, or
        the assembled result fails one of R-a .. R-d.
    """
    if len(gmax.layers) < 2 or not gmax.layers[1]:
        raise InternalConsistencyError("penultimate layer is empty")
    order = tuple(sorted(gmax.layers[1]))
    g_v = dict(gmax.g)
    h: dict[int, int] = {}
    prov: dict[int, Provenance] = {}
    matched: list[int] = []
    for m, v in enumerate(order):
        prev = order[:m]
        # columns: previous vertices; rows: matched outputs
        rows = []
        rhs = []
        for r in matched:
            bits = 0
            for pos, u in enumerate(prev):
                if r in gmax.g[u]:
                    bits |= 1 << pos
            rows.append(bits)
            rhs.append(1 if r in gmax.g[v] else 0)
        x = solve_gf2_bits(rows, rhs)
        if x is None:
            raise InternalConsistencyError(f"no U set for vertex {v}")
        u_set = frozenset(u for pos, u in enumerate(prev) if x >> pos & 1)
        o_set = set(gmax.g[v])
        for u in u_set:
            o_set ^= gmax.g[u]
        o_m = frozenset(o_set)
        adjacent = sorted(r for r in o_m if g.has_edge(v, r))
        if not adjacent:
            raise InternalConsistencyError(f"no adjacent successor for vertex {v}")
        g_v[v] = o_m
        h[v] = adjacent[0]
        matched.append(adjacent[0])
        prov[v] = Provenance(u_set, o_m)
    mg = MatchingGflow(order, g_v, h, frozenset(matched), prov, gmax.layers, gmax)
    problems = matching_violations(g, mg)
    if problems:
        raise InternalConsistencyError("matching gflow invalid: " + ", ".join(problems))
    return mg


def reduce_outputs(g: OpenGraph, gmax: Gflow, r: Iterable[int]) -> tuple[OpenGraph, Gflow]:
    """Remove matched outputs ``r`` and promote the penultimate layer to outputs.

    Returns
    -------
    (OpenGraph, Gflow)
        The graph ``(G \\ R, I \\ R, V_1 ∪ (O \\ R))`` and a gflow of it whose
        layers are the old layers shifted down by one.

    Raises
    ------
    ValueError
        If ``r`` violates R-a or R-b for the penultimate layer.
    """
    r = frozenset(r)
    v1 = tuple(sorted(gmax.layers[1])) if len(gmax.layers) > 1 else ()
    if len(r) != len(v1):
        raise ValueError("precondition R-a violated")
    if not r <= frozenset(g.outputs):
        raise ValueError("removed set must consist of outputs")
    if not is_basis([g.vset(gmax.g[v]) for v in v1], g.vset(r)):
        raise ValueError("precondition R-b violated")
    r_list = sorted(r)
    rows = []
    for x in r_list:
        bits = 0
        for pos, u in enumerate(v1):
            if x in gmax.g[u]:
                bits |= 1 << pos
        rows.append(bits)
    new_outputs = frozenset(v1) | (g.outputs - r)
    reduced = g.without_vertices(r, outputs=new_outputs)
    g_new: dict[int, frozenset[int]] = {}
    for v in reduced.non_outputs:
        rhs = [1 if x in gmax.g[v] else 0 for x in r_list]
        sol = solve_gf2_bits(rows, rhs)
        if sol is None:
            raise InternalConsistencyError(f"no V_v set for vertex {v}")
        acc = set(gmax.g[v] - r)
        for pos, u in enumerate(v1):
            if sol >> pos & 1:
                acc ^= gmax.g[u] - r
        g_new[v] = frozenset(acc)
    layers = (frozenset(gmax.layers[0] - r) | gmax.layers[1],) + tuple(gmax.layers[2:])
    return reduced, Gflow(g_new, layers)


@dataclass(frozen=True)
class PathCover:
    """Vertex-disjoint directed paths, each a tuple of vertex ids."""

    paths: tuple[tuple[int, ...], ...]

    def successor(self) -> dict[int, int]:
        return {p[k]: p[k + 1] for p in self.paths for k in range(len(p) - 1)}

    def path_of(self) -> dict[int, int]:
        """Map each vertex to the index of its path."""
        return {v: k for k, p in enumerate(self.paths) for v in p}

    def to_dict(self) -> dict[str, Any]:
        return {"paths": [list(p) for p in self.paths]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def path_cover_violations(g: OpenGraph, pc: PathCover) -> list[str]:
    """Check the path-cover conditions and that every arc is a graph edge."""
    out: list[str] = []
    seen: list[int] = [v for p in pc.paths for v in p]
    if len(seen) != len(set(seen)):
        out.append("paths are not vertex-disjoint")
    if set(seen) != set(g.vertices):
        out.append("paths do not cover V")
    for p in pc.paths:
        if not p:
            out.append("empty path")
            continue
        if any(v in g.inputs for v in p[1:]):
            out.append(f"path {p} meets I after its start")
        if any(v in g.outputs for v in p[:-1]):
            out.append(f"path {p} meets O before its end")
        for a, b in zip(p, p[1:]):
            if not g.has_edge(a, b):
                out.append(f"arc {a}->{b} is not an edge")
    return out


def assemble_paths(vertices: Iterable[int], arcs: Mapping[int, int]) -> PathCover:
    """Chain arcs ``u -> succ(u)`` into maximal paths, ordered by end vertex."""
    verts = sorted(vertices)
    has_pred = set(arcs.values())
    paths = []
    for v in verts:
        if v in has_pred:
            continue
        p = [v]
        while p[-1] in arcs:
            p.append(arcs[p[-1]])
        paths.append(tuple(p))
    if sum(len(p) for p in paths) != len(verts):
        raise InternalConsistencyError("arcs contain a cycle")
    return PathCover(tuple(sorted(paths, key=lambda p: p[-1])))


@dataclass(frozen=True)
class Round:
    """One matching round of the path-cover construction."""

    graph: OpenGraph
    gflow: Gflow
    matching: MatchingGflow


def matching_rounds(g: OpenGraph, gmax: Gflow | None = None) -> list[Round]:
    """Run matching and reduction rounds until only outputs remain."""
    if gmax is None:
        gmax = find_max_delayed_gflow(g)
    if gmax is None:
        raise NoGflowError()
    rounds: list[Round] = []
    cur_g, cur_f = g, gmax
    while cur_g.non_outputs:
        mg = build_matching_gflow(cur_g, cur_f)
        rounds.append(Round(cur_g, cur_f, mg))
        cur_g, cur_f = reduce_outputs(cur_g, cur_f, mg.r)
    return rounds


def build_path_cover(g: OpenGraph) -> PathCover:
    """Path cover from repeated matching rounds.

    Raises
    ------
    NoGflowError
        If ``g`` has no gflow.
    """
    arcs: dict[int, int] = {}
    for rnd in matching_rounds(g):
        arcs.update(rnd.matching.h)
    pc = assemble_paths(g.vertices, arcs)
    problems = path_cover_violations(g, pc)
    if problems:
        raise InternalConsistencyError("path cover invalid: " + ", ".join(problems))
    return pc
