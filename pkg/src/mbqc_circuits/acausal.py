"""Acausal circuits: SPT for gflow, post-selected acausal CZ gates and their rewriting.

Gates of an :class:`AcausalCircuit` live at symbolic positions. Position
``x`` (written ``x!``) is the stretch of ``x``'s wire between the J gate of
its path predecessor and its own J gate; for outputs it runs to the end of the
wire. Whether two positions can share a time slice is computed from the J
schedule, never stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Union

import numpy as np

from mbqc_circuits.circuit import CX, CZ, Circuit, Gate, H, J, Op, Postselect, Prep, Segment, op_to_record
from mbqc_circuits.graph import OpenGraph
from mbqc_circuits.pathcover import InternalConsistencyError, PathCover, assemble_paths
from mbqc_circuits.simulator import CZ_MAT, I2, MINUS, PLUS, PostselectedCircuit, X, Z
from mbqc_circuits.translator import (
    LayerRound,
    MeasurementPattern,
    cross_edges,
    translation_rounds,
)

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence


# positional gates -------------------------------------------------------------------


@dataclass(frozen=True)
class ACCZ:
    """Acausal CZ between positions ``p!`` and ``q!`` (stored with ``p < q``)."""

    p: int
    q: int
    uid: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        if self.p == self.q:
            raise ValueError("acausal CZ needs two distinct positions")
        if self.p > self.q:
            p, q = self.q, self.p
            object.__setattr__(self, "p", p)
            object.__setattr__(self, "q", q)

    @property
    def positions(self) -> tuple[int, int]:
        return (self.p, self.q)


@dataclass(frozen=True)
class PCZ:
    """Ordinary CZ between two co-realizable positions."""

    p: int
    q: int
    uid: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        if self.p == self.q:
            raise ValueError("CZ needs two distinct positions")
        if self.p > self.q:
            p, q = self.q, self.p
            object.__setattr__(self, "p", p)
            object.__setattr__(self, "q", q)

    @property
    def positions(self) -> tuple[int, int]:
        return (self.p, self.q)


@dataclass(frozen=True)
class ACX:
    """Acausal CNOT ``H_t · ACCZ(c!, t!) · H_t`` with control ``c!`` and target ``t!``.

    ``passed`` holds the uids of gates at ``t!`` that the CNOT has been
    commuted past; those act after it in time, the others before it.
    """

    control: int
    target: int
    passed: frozenset[int] = frozenset()
    uid: int = field(default=0, compare=False)

    @property
    def positions(self) -> tuple[int, int]:
        return (self.control, self.target)


PGate = Union[ACCZ, PCZ, ACX]


@dataclass(frozen=True)
class AcausalCircuit:
    """Circuit over path-cover wires with positional two-qubit gates.

    Parameters
    ----------
    paths : tuple[tuple[int, ...], ...]
        One path per wire; wire ``w`` carries ``paths[w]``.
    inputs : frozenset[int]
        Path starts that carry the map's inputs; other wires start in ``|+⟩``.
    angles : Mapping[int, float]
        ``α_v`` for every vertex that is not the last of its path.
    schedule : tuple[int, ...]
        Time order of the J gates, a linear extension of every path.
    gates : tuple of ACCZ, PCZ or ACX
        Positional gates, all with distinct uids.
    tail : tuple of Gate
        Ordinary wire gates applied after everything else.
    """

    paths: tuple[tuple[int, ...], ...]
    inputs: frozenset[int]
    angles: Mapping[int, float]
    schedule: tuple[int, ...]
    gates: tuple[PGate, ...] = ()
    tail: tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "tail", tuple(self.tail))
        uids = [gate.uid for gate in self.gates]
        if len(set(uids)) != len(uids):
            raise ValueError("gate uids must be distinct")
        measured = {v for p in self.paths for v in p[:-1]}
        if set(self.schedule) != measured or len(self.schedule) != len(measured):
            raise ValueError("schedule must list every measured vertex once")
        step = {v: k for k, v in enumerate(self.schedule)}
        for p in self.paths:
            for a, b in zip(p[:-1], p[1:-1]):
                if step[a] > step[b]:
                    raise ValueError("schedule contradicts a wire")

    # structure ----------------------------------------------------------------------

    @property
    def n_wires(self) -> int:
        return len(self.paths)

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(v for p in self.paths for v in p)

    @property
    def prep_wires(self) -> frozenset[int]:
        return frozenset(w for w, p in enumerate(self.paths) if p[0] not in self.inputs)

    def wire_of(self) -> dict[int, int]:
        return {v: w for w, p in enumerate(self.paths) for v in p}

    def pred(self) -> dict[int, int]:
        return {p[k + 1]: p[k] for p in self.paths for k in range(len(p) - 1)}

    def step(self) -> dict[int, int]:
        return {v: k for k, v in enumerate(self.schedule)}

    def interval(self, x: int) -> tuple[int, int]:
        """``(lo, hi)``: position ``x!`` is open strictly after J step ``lo`` and before step ``hi``."""
        step = self.step()
        pred = self.pred()
        lo = step[pred[x]] if x in pred else -1
        hi = step.get(x, len(self.schedule))
        return lo, hi

    def co_realizable(self, p: int, q: int) -> bool:
        lp, hp = self.interval(p)
        lq, hq = self.interval(q)
        return max(lp, lq) < min(hp, hq)

    def flags(self) -> tuple[bool, ...]:
        """Per gate: ``True`` when its two positions share a time slice."""
        return tuple(self.co_realizable(*gate.positions) for gate in self.gates)

    def acausal_gates(self) -> tuple[ACCZ, ...]:
        return tuple(g for g, ok in zip(self.gates, self.flags()) if isinstance(g, ACCZ) and not ok)

    def edge_set(self) -> frozenset[tuple[int, int]]:
        """Position pairs of ACCZ and PCZ gates, with an odd multiplicity."""
        out: set[tuple[int, int]] = set()
        for g in self.gates:
            if isinstance(g, (ACCZ, PCZ)):
                out ^= {g.positions}
        return frozenset(out)

    def next_uid(self) -> int:
        return max((g.uid for g in self.gates), default=-1) + 1

    def slot(self, x: int) -> tuple[int, int]:
        """``(wire, index of x on its path)``."""
        for w, p in enumerate(self.paths):
            if x in p:
                return w, p.index(x)
        raise KeyError(x)

    def restricted(self, keep: Iterable[int]) -> AcausalCircuit:
        """Drop vertices outside ``keep`` from the ends of paths; gates must stay inside."""
        keep = frozenset(keep)
        paths = []
        for p in self.paths:
            q = tuple(v for v in p if v in keep)
            if q != p[: len(q)]:
                raise ValueError("can only cut vertices from the end of a path")
            if not q:
                raise ValueError("a wire would lose all its vertices")
            paths.append(q)
        measured = {v for p in paths for v in p[:-1]}
        for g in self.gates:
            if not set(g.positions) <= keep:
                raise ValueError(f"gate {g} touches a removed vertex")
        return AcausalCircuit(
            tuple(paths),
            self.inputs & keep,
            {v: a for v, a in self.angles.items() if v in measured},
            tuple(v for v in self.schedule if v in measured),
            self.gates,
            self.tail,
        )

    def to_jsonl(self) -> str:
        """JSON lines in time order; ACCZ records carry ``[wire, slot]`` positions."""
        lines = []
        for kind, payload in _timeline(self):
            if kind == "J":
                v = payload
                w, _ = self.slot(v)
                lines.append(json.dumps(op_to_record(J(w, self.angles[v]))))
            elif kind == "PCZ":
                wo = self.wire_of()
                lines.append(json.dumps(op_to_record(CZ(wo[payload.p], wo[payload.q]))))
            elif kind == "ACCZ":
                lines.append(json.dumps({"gate": "ACCZ", "positions": [list(self.slot(payload.p)), list(self.slot(payload.q))]}))
            elif kind == "ACX":
                lines.append(
                    json.dumps({"gate": "ACX", "control": list(self.slot(payload.control)), "target": list(self.slot(payload.target))})
                )
        for gate in self.tail:
            lines.append(json.dumps(op_to_record(gate)))
        return "\n".join(lines) + ("\n" if lines else "")


def _timeline(c: AcausalCircuit) -> list[tuple[str, object]]:
    """Coarse time order: each two-position gate right after its later opening J."""
    buckets: list[list[tuple[str, object]]] = [[] for _ in range(len(c.schedule) + 1)]
    for g in sorted(c.gates, key=lambda g: (g.positions, g.uid)):
        lo = max(c.interval(x)[0] for x in g.positions)
        kind = "PCZ" if isinstance(g, PCZ) else ("ACX" if isinstance(g, ACX) else "ACCZ")
        buckets[lo + 1].append((kind, g))
    out: list[tuple[str, object]] = []
    for k in range(len(c.schedule) + 1):
        out.extend(buckets[k])
        if k < len(c.schedule):
            out.append(("J", c.schedule[k]))
    return out


# SPT for gflow ----------------------------------------------------------------------


def gflow_schedule(rounds: Sequence[LayerRound]) -> tuple[int, ...]:
    """J order: deepest layer first; within a layer ``v_n, ..., v_1`` (the ``≺_V`` order)."""
    out: list[int] = []
    for rnd in reversed(rounds):
        out.extend(reversed(rnd.matching.order))
    return tuple(out)


def rounds_cover(g: OpenGraph, rounds: Sequence[LayerRound]) -> PathCover:
    arcs: dict[int, int] = {}
    for rnd in rounds:
        arcs.update(rnd.matching.h)
    return assemble_paths(g.vertices, arcs)


def _reaches(succ: Mapping[int, set[int]], src: int, dst: int) -> bool:
    stack, seen = [src], {src}
    while stack:
        x = stack.pop()
        if x == dst:
            return True
        for y in succ[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return False


def slice_schedule(
    paths: Sequence[Sequence[int]],
    edges: Iterable[tuple[int, int]],
    priority: Sequence[int],
) -> tuple[int, ...]:
    """J order that makes as many two-position gates co-realizable as a greedy pass allows.

    Gate ``(u!, v!)`` is co-realizable when ``J(pred(u))`` precedes ``J(v)``
    and ``J(pred(v))`` precedes ``J(u)``. Edges that are co-realizable under
    ``priority`` are committed first, the rest in sorted order; an edge whose
    constraints would close a cycle is skipped. Ties in the final topological
    sort follow ``priority``.
    """
    measured = [v for p in paths for v in p[:-1]]
    pred = {p[k + 1]: p[k] for p in paths for k in range(len(p) - 1)}
    succ: dict[int, set[int]] = {v: set() for v in measured}
    for p in paths:
        for a, b in zip(p[:-1], p[1:-1]):
            succ[a].add(b)
    rank = {v: k for k, v in enumerate(priority)}

    def needs(u: int, v: int) -> list[tuple[int, int]]:
        out = []
        for x, y in ((u, v), (v, u)):
            if x in pred and y in succ:
                out.append((pred[x], y))
        return out

    def fits(u: int, v: int) -> bool:
        return all(rank[a] < rank[b] for a, b in needs(u, v))

    edges = sorted(edges)
    for u, v in [e for e in edges if fits(*e)] + [e for e in edges if not fits(*e)]:
        arcs = needs(u, v)
        added = []
        ok = True
        for a, b in arcs:
            if a == b or _reaches(succ, b, a):
                ok = False
                break
            if b not in succ[a]:
                succ[a].add(b)
                added.append((a, b))
        if not ok:
            for a, b in added:
                succ[a].discard(b)
    indeg = {v: 0 for v in measured}
    for a in succ:
        for b in succ[a]:
            indeg[b] += 1
    ready = sorted((v for v in measured if indeg[v] == 0), key=rank.__getitem__)
    out: list[int] = []
    while ready:
        v = ready.pop(0)
        out.append(v)
        for b in succ[v]:
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
        ready.sort(key=rank.__getitem__)
    return tuple(out)


def spt_gflow(p: MeasurementPattern, rounds: Sequence[LayerRound] | None = None) -> AcausalCircuit:
    """Star pattern transformation for a pattern with gflow.

    Wires follow the path cover of the matching rounds. Every edge that is not
    a path arc becomes an ACCZ at its two positions. The J schedule comes from
    :func:`slice_schedule` with the layer order of :func:`gflow_schedule` as
    priority; :meth:`AcausalCircuit.flags` marks the gates that are temporally
    consistent under it.

    Raises
    ------
    NoGflowError
        If the graph has no gflow.
    """
    g = p.graph
    if rounds is None:
        rounds, _ = translation_rounds(g)
    cover = rounds_cover(g, rounds)
    edges = sorted(cross_edges(g, cover.successor()))
    gates = tuple(ACCZ(a, b, k) for k, (a, b) in enumerate(edges))
    schedule = slice_schedule(cover.paths, edges, gflow_schedule(rounds))
    return AcausalCircuit(cover.paths, frozenset(g.inputs), dict(p.angles), schedule, gates)


# expansion into a post-selected circuit --------------------------------------------


def _events(c: AcausalCircuit, expand: Callable[[PGate], bool]) -> list[tuple]:
    """Abstract time-ordered events.

    Event kinds: ``("J", v)``, ``("CZ", p, q)``, ``("H", x)``,
    ``("end", key, x)`` for one endpoint of an expanded acausal CZ ``key`` at
    position ``x``, and ``("tail", gate)``.
    """
    acx_at: dict[int, ACX] = {}
    for g in c.gates:
        if isinstance(g, ACX):
            if g.target in acx_at:
                raise ValueError("two acausal CNOTs share a target position")
            acx_at[g.target] = g
    ordinary: list[tuple[int, int]] = []
    at: dict[int, list[tuple[int, PGate]]] = {}
    for g in c.gates:
        if isinstance(g, ACX):
            at.setdefault(g.control, []).append((g.uid, g))
            continue
        if isinstance(g, PCZ) or not expand(g):
            if not c.co_realizable(g.p, g.q):
                raise ValueError(f"ordinary CZ at ({g.p}!, {g.q}!) spans two time slices")
            if g.p in acx_at or g.q in acx_at:
                raise ValueError("an ordinary CZ may not share a position with an acausal CNOT target")
            ordinary.append((g.p, g.q))
            continue
        for x in g.positions:
            at.setdefault(x, []).append((g.uid, g))
    n = len(c.schedule)
    buckets: list[list[tuple]] = [[] for _ in range(n + 1)]
    for p, q in sorted(ordinary):
        lo = max(c.interval(p)[0], c.interval(q)[0])
        buckets[lo + 1].append(("CZ", p, q))
    for x in sorted(c.vertices):
        lo = c.interval(x)[0]
        here = sorted(at.get(x, []), key=lambda t: t[0])
        acx = acx_at.get(x)
        if acx is None:
            buckets[lo + 1].extend(("end", uid, x) for uid, _ in here)
            continue
        before = [uid for uid, g in here if uid not in acx.passed]
        after = [uid for uid, g in here if uid in acx.passed]
        ev = [("end", uid, x) for uid in before]
        ev += [("H", x), ("end", acx.uid, x), ("H", x)]
        ev += [("end", uid, x) for uid in after]
        buckets[lo + 1].extend(ev)
    out: list[tuple] = []
    for k in range(n + 1):
        out.extend(buckets[k])
        if k < n:
            out.append(("J", c.schedule[k]))
    out.extend(("tail", gate) for gate in c.tail)
    return out


def expand_acausal(c: AcausalCircuit, all_gates: bool = False) -> PostselectedCircuit:
    """Replace acausal gates by their ancilla gadget.

    Each expanded ACCZ at ``(x!, y!)`` gets ancillas ``x', y'``: when the first
    of its positions comes up, ``|+⟩_{x'}|+⟩_{y'}``, ``CZ_{x!;x'}``,
    ``CZ_{x';y'}`` and ``⟨+|_{x'}``; at the second, ``CZ_{y';y!}`` and
    ``⟨+|_{y'}``. An ACX target gets the same gadget between two Hadamards.

    Parameters
    ----------
    all_gates : bool
        Expand every ACCZ. By default temporally consistent ACCZs become
        ordinary CZs.
    """
    flags = dict(zip((g.uid for g in c.gates), c.flags()))

    def expand(g: PGate) -> bool:
        return all_gates or not flags[g.uid]

    events = _events(c, expand)
    wire_of = c.wire_of()
    n = c.n_wires
    anc: dict[int, tuple[int, int]] = {}
    seen: set[int] = set()
    ops: list[Op] = []
    next_anc = n
    for ev in events:
        kind = ev[0]
        if kind == "J":
            v = ev[1]
            ops.append(J(wire_of[v], c.angles[v], v))
        elif kind == "CZ":
            ops.append(CZ(wire_of[ev[1]], wire_of[ev[2]]))
        elif kind == "H":
            ops.append(H(wire_of[ev[1]]))
        elif kind == "tail":
            ops.append(ev[1])
        else:
            _, uid, x = ev
            w = wire_of[x]
            if uid not in seen:
                seen.add(uid)
                a, b = next_anc, next_anc + 1
                next_anc += 2
                anc[uid] = (a, b)
                ops += [Prep(a), Prep(b), CZ(w, a), CZ(a, b), Postselect(a)]
            else:
                _, b = anc[uid]
                ops += [CZ(b, w), Postselect(b)]
    return PostselectedCircuit(n, next_anc - n, tuple(ops), c.prep_wires, c.paths)


# identities ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentityResult:
    """Outcome of :func:`apply_acausal_identity`."""

    circuit: AcausalCircuit
    applied: bool
    report: str


def _by_uid(c: AcausalCircuit, uid: int) -> PGate | None:
    for g in c.gates:
        if g.uid == uid:
            return g
    return None


def _replace_gates(c: AcausalCircuit, remove: Iterable[int] = (), add: Iterable[PGate] = ()) -> AcausalCircuit:
    gone = set(remove)
    gates = tuple(g for g in c.gates if g.uid not in gone) + tuple(add)
    return replace(c, gates=gates)


def apply_acausal_identity(c: AcausalCircuit, which: str, site: int | tuple[int, int]) -> IdentityResult:
    """Apply one rewrite identity at ``site`` (gate uids).

    ``a``
        ``site = uid``: a temporally consistent ACCZ becomes an ordinary CZ,
        or an ordinary CZ becomes an ACCZ.
    ``b``
        ``site = uid`` of an ACX that has passed every gate at its target:
        it moves through ``J(α_{pred(t)})`` and becomes ``ACCZ(c!, pred(t)!)``.
        At the start of a ``|+⟩`` wire it is removed instead.
    ``c``
        ``site = (acx uid, gate uid)``: the ACX passes an ACCZ at
        ``(t!, w!)``, which creates ``ACCZ(c!, w!)``.
    ``d``
        ``site = (uid, uid)``: two ACCZs on the same positions cancel.

    A site that does not match the left-hand side leaves ``c`` unchanged and
    explains why in the report.
    """

    def miss(msg: str) -> IdentityResult:
        return IdentityResult(c, False, msg)

    if which == "a":
        g = _by_uid(c, site) if isinstance(site, int) else None
        if isinstance(g, ACCZ):
            if not c.co_realizable(g.p, g.q):
                return miss(f"ACCZ at ({g.p}!, {g.q}!) is not temporally consistent")
            return IdentityResult(_replace_gates(c, [g.uid], [PCZ(g.p, g.q, g.uid)]), True, "ACCZ -> CZ")
        if isinstance(g, PCZ):
            return IdentityResult(_replace_gates(c, [g.uid], [ACCZ(g.p, g.q, g.uid)]), True, "CZ -> ACCZ")
        return miss("site is not a CZ or ACCZ")
    if which == "b":
        g = _by_uid(c, site) if isinstance(site, int) else None
        if not isinstance(g, ACX):
            return miss("site is not an acausal CNOT")
        at_t = {h.uid for h in c.gates if h.uid != g.uid and g.target in h.positions}
        if not at_t <= g.passed:
            return miss("acausal CNOT has not passed every gate at its target")
        pred = c.pred()
        if g.target in pred:
            new = ACCZ(g.control, pred[g.target], g.uid)
            return IdentityResult(_replace_gates(c, [g.uid], [new]), True, "ACX through J -> ACCZ")
        if g.target not in c.inputs:
            return IdentityResult(_replace_gates(c, [g.uid]), True, "ACX on |+> removed")
        return miss("target is an input position")
    if which == "c":
        if not isinstance(site, tuple) or len(site) != 2:
            return miss("site must be (acx uid, gate uid)")
        x, h = _by_uid(c, site[0]), _by_uid(c, site[1])
        if not isinstance(x, ACX) or not isinstance(h, ACCZ):
            return miss("site must name an acausal CNOT and an ACCZ")
        if x.target not in h.positions or h.uid in x.passed:
            return miss("ACCZ is not an unpassed gate at the CNOT target")
        w = h.q if h.p == x.target else h.p
        if w == x.control:
            return miss("ACCZ joins the CNOT's own control and target")
        moved = replace(x, passed=x.passed | {h.uid})
        new = ACCZ(x.control, w, c.next_uid())
        return IdentityResult(_replace_gates(c, [x.uid], [moved, new]), True, "ACX past ACCZ")
    if which == "d":
        if not isinstance(site, tuple) or len(site) != 2 or site[0] == site[1]:
            return miss("site must be two distinct uids")
        a, b = _by_uid(c, site[0]), _by_uid(c, site[1])
        if not isinstance(a, ACCZ) or not isinstance(b, ACCZ) or a.positions != b.positions:
            return miss("site must name two ACCZs on the same positions")
        if any(isinstance(g, ACX) and g.target in a.positions for g in c.gates):
            return miss("positions are shared with an acausal CNOT target")
        return IdentityResult(_replace_gates(c, [a.uid, b.uid]), True, "ACCZ pair removed")
    return miss(f"unknown identity {which!r}")


def _must(res: IdentityResult) -> AcausalCircuit:
    if not res.applied:
        raise InternalConsistencyError("rewrite step did not apply: " + res.report)
    return res.circuit


# rewriting to an ordinary circuit --------------------------------------------------


StepHook = Callable[[int, int, AcausalCircuit], None]


def _toggle_cancel(c: AcausalCircuit, new_uid: int) -> AcausalCircuit:
    """Cancel the ACCZ ``new_uid`` against an older one on the same positions, if any."""
    new = _by_uid(c, new_uid)
    for g in c.gates:
        if isinstance(g, ACCZ) and g.uid != new_uid and g.positions == new.positions:
            return _must(apply_acausal_identity(c, "d", (g.uid, new_uid)))
    return c


def _push_cnot(c: AcausalCircuit, control: int, target: int) -> AcausalCircuit:
    """Insert ``CX·CX`` at the end and commute one copy back to ``target``'s wire start."""
    uid = c.next_uid()
    c = replace(c, gates=c.gates + (ACX(control, target, frozenset(), uid),))
    while True:
        x = _by_uid(c, uid)
        todo = sorted(
            (g for g in c.gates if isinstance(g, ACCZ) and target in g.positions and g.uid not in x.passed),
            key=lambda g: (g.positions, g.uid),
        )
        if not todo:
            break
        before = {g.uid for g in c.gates}
        c = _must(apply_acausal_identity(c, "c", (uid, todo[0].uid)))
        (created,) = [g.uid for g in c.gates if g.uid not in before]
        c = _toggle_cancel(c, created)
    c = _must(apply_acausal_identity(c, "b", uid))
    if _by_uid(c, uid) is not None:
        c = _toggle_cancel(c, uid)
    return c


def rewrite_acausal_to_ordinary(
    c: AcausalCircuit,
    graph: OpenGraph,
    rounds: Sequence[LayerRound] | None = None,
    on_step: StepHook | None = None,
) -> Circuit:
    """Eliminate every acausal gate of ``c = spt_gflow(p)`` layer by layer.

    For the last-measured layer ``v_1 .. v_n`` and each ``i``, a pair of
    CNOTs ``CX_{h(v_i); g_V(v_i) ⊕ h(v_i)}`` is inserted at the end; one copy is
    commuted backwards through the positional gates with identities (c) and
    (b), cancelling duplicates with (d), and the other stays in the output
    Clifford. Afterwards every gate at a matched output is temporally
    consistent, becomes an ordinary CZ by (a), and the matched outputs are
    removed. The process repeats on the remaining graph.

    ``on_step(layer, i, state)`` is called with the positional state of the
    current layer after each step (``i = 0`` is the state before the first).

    Raises
    ------
    InternalConsistencyError
        If a positional gate survives, or the gate set after step ``i``
        differs from the cross edges of the graph sequence.
    """
    if rounds is None:
        rounds, residual = translation_rounds(graph)
    else:
        residual = None
    cover = rounds_cover(graph, rounds)
    if cover.paths != c.paths:
        raise ValueError("circuit wires do not match the matching rounds")
    wire_of = c.wire_of()
    succ = cover.successor()
    state = c
    for g in state.gates:
        if isinstance(g, PCZ):
            state = _must(apply_acausal_identity(state, "a", g.uid))
        elif not isinstance(g, ACCZ):
            raise ValueError("input may only contain CZ and ACCZ gates")
    # ACCZs are schedule independent, so the layer order can be imposed freely
    state = replace(state, schedule=gflow_schedule(rounds))
    if state.tail:
        raise ValueError("input may not carry tail gates")
    blocks: list[tuple[str, int, list[Gate]]] = []
    for k, rnd in enumerate(rounds, start=1):
        gr = rnd.graph
        state = state.restricted(gr.vertices)
        if state.edge_set() != cross_edges(gr, succ):
            raise InternalConsistencyError(f"layer {k}: gates differ from the cross edges of the layer graph")
        # output-output gates act at the very end: identity (a), then off to the tail
        oo = [g for g in state.gates if set(g.positions) <= gr.outputs]
        for g in oo:
            state = _must(apply_acausal_identity(state, "a", g.uid))
        e_oo = [CZ(wire_of[g.p], wire_of[g.q]) for g in sorted(oo, key=lambda g: g.positions)]
        state = replace(state, gates=tuple(g for g in state.gates if g.uid not in {x.uid for x in oo}), tail=tuple(e_oo))
        seq = rnd.sequence
        if on_step is not None:
            on_step(k, 0, state)
        mg = rnd.matching
        for i, v in enumerate(mg.order, start=1):
            r = mg.h[v]
            targets = sorted(mg.g_v[v] - {r})
            for t in targets:
                state = _push_cnot(state, r, t)
            state = replace(state, tail=tuple(CX(wire_of[r], wire_of[t]) for t in targets) + state.tail)
            want = cross_edges(seq.graphs[i], succ)
            if state.edge_set() != want or any(not isinstance(g, ACCZ) for g in state.gates):
                raise InternalConsistencyError(f"layer {k} step {i}: gates differ from the graph sequence")
            if on_step is not None:
                on_step(k, i, state)
        # every gate at a matched output is now an ordinary CZ inside this layer
        local = {v: n for n, v in enumerate(reversed(mg.order))}
        spt_buckets: dict[int, list[tuple[int, int]]] = {v: [] for v in mg.order}
        pred = state.pred()
        for g in state.gates:
            touch = set(g.positions) & mg.r
            if not touch:
                continue
            (x,) = touch
            y = g.q if g.p == x else g.p
            if y not in local or not local[pred[x]] < local[y] or not state.co_realizable(x, y):
                raise InternalConsistencyError(f"layer {k}: gate at ({g.p}!, {g.q}!) stays acausal")
            state = _must(apply_acausal_identity(state, "a", g.uid))
            spt_buckets[pred[x]].append((x, y))
        spt: list[Gate] = []
        for v in reversed(mg.order):
            spt.append(J(wire_of[v], c.angles[v], v))
            for x, y in sorted(spt_buckets[v], key=lambda e: e[1]):
                spt.append(CZ(wire_of[x], wire_of[y]))
        blocks.append(("uo", k, list(state.tail)))
        blocks.append(("spt", k, spt))
        state = replace(state, gates=tuple(g for g in state.gates if not set(g.positions) & mg.r), tail=())
    rest = state.restricted(residual.vertices) if residual is not None else state
    final = sorted(g.positions for g in rest.gates)
    if residual is not None and set(final) != set(residual.edges):
        raise InternalConsistencyError("residual gates differ from the residual graph")
    blocks.append(("uo", len(rounds) + 1, [CZ(wire_of[p], wire_of[q]) for p, q in final]))
    gates: list[Gate] = []
    segments = []
    for kind, k, block in reversed(blocks):
        segments.append(Segment(kind, k, len(gates), len(gates) + len(block)))
        gates.extend(block)
    return Circuit(len(c.paths), tuple(gates), c.prep_wires, c.paths, tuple(segments))


# gate teleportation ------------------------------------------------------------------


TELEPORT_CORRECTIONS: dict[tuple[int, int], np.ndarray] = {
    (0, 0): I2,
    (0, 1): X,
    (1, 0): Z,
    (1, 1): X @ Z,
}
"""Pauli ``P_C(s_A, s_B)`` left on ``C`` by Bell outcome ``(s_A, s_B)``; 0 means ``+``.

The ``(1, 1)`` entry is ``XZ = -iY``, the exact branch operator, so every
corrected branch equals ``U′U / 2`` with no leftover phase.
"""


def _as_unitary(u: Sequence[Gate] | np.ndarray) -> np.ndarray:
    from mbqc_circuits.simulator import HAD, j_matrix

    if isinstance(u, np.ndarray):
        m = np.asarray(u, dtype=complex)
    else:
        m = np.eye(2, dtype=complex)
        for gate in u:
            if isinstance(gate, J):
                m = j_matrix(gate.angle) @ m
            elif isinstance(gate, H):
                m = HAD @ m
            else:
                raise ValueError(f"not a single-wire gate: {gate!r}")
    if m.shape != (2, 2) or np.max(np.abs(m.conj().T @ m - np.eye(2))) > 1e-12:
        raise ValueError("teleported gate must be a 2x2 unitary")
    return m


@dataclass(frozen=True)
class TeleportGadget:
    """Evaluated teleportation of ``U`` on ``A`` into ``U′`` on ``C``.

    Attributes
    ----------
    branches : dict[tuple[int, int], numpy.ndarray]
        Map ``A -> C`` for each Bell outcome, after the correction when the
        policy is ``"pauli-correct"``.
    channel : numpy.ndarray or None
        Averaged superoperator (4x4, column-stacked) under ``"pauli-correct"``.
    policy : str
    """

    u: np.ndarray
    uprime: np.ndarray
    policy: str
    branches: dict[tuple[int, int], np.ndarray]
    channel: np.ndarray | None


def bell_branch(sa: int, sb: int) -> np.ndarray:
    """``⟨s_A s_B| CZ_{AB} · CZ_{BC}|+⟩_B|+⟩_C`` as a map from ``A`` to ``C``."""
    bras = (PLUS, MINUS)
    t = np.zeros((2, 2), dtype=complex)  # [c, a]
    for a in range(2):
        for b in range(2):
            for cbit in range(2):
                amp = bras[sa][a].conj() * bras[sb][b].conj() * 0.5
                amp *= (-1) ** (a & b) * (-1) ** (b & cbit)
                t[cbit, a] += amp
    return t


def teleport_expand(u: Sequence[Gate] | np.ndarray, uprime: Sequence[Gate] | np.ndarray, policy: str) -> TeleportGadget:
    """Teleport ``φ`` from ``A`` to ``C`` between ``U`` and ``U′``.

    With ``policy="postselect"`` only the ``(+, +)`` branch is kept and equals
    ``U′U / 2``. With ``policy="pauli-correct"`` each branch ``U′ P U / 2`` is
    followed by the correction ``U′ P† U′†`` pushed past ``U′``, so every
    branch becomes ``U′U / 2`` and the averaged channel is conjugation by
    ``U′U``.

    Raises
    ------
    ValueError
        For a non-unitary ``U`` or ``U′`` or an unknown policy.
    """
    um, upm = _as_unitary(u), _as_unitary(uprime)
    if policy not in ("postselect", "pauli-correct"):
        raise ValueError(f"unknown policy {policy!r}")
    outcomes = [(0, 0)] if policy == "postselect" else sorted(TELEPORT_CORRECTIONS)
    branches: dict[tuple[int, int], np.ndarray] = {}
    for s in outcomes:
        raw = upm @ bell_branch(*s) @ um
        if policy == "pauli-correct":
            p = TELEPORT_CORRECTIONS[s]
            raw = upm @ p.conj().T @ upm.conj().T @ raw
        branches[s] = raw
    channel = None
    if policy == "pauli-correct":
        channel = sum(np.kron(b.conj(), b) for b in branches.values())
    return TeleportGadget(um, upm, policy, branches, channel)


def sent_back_probabilities(phi: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Outcome statistics of measuring ``C`` before ``φ`` is prepared on ``A``.

    ``C`` is measured in the orthonormal ``basis`` (columns) right after the
    Bell pair is made; only afterwards is ``φ`` put on ``A`` and the ``(+, +)``
    Bell outcome post-selected. Returns the conditional probability of each
    basis outcome.
    """
    phi = np.asarray(phi, dtype=complex)
    phi = phi / np.linalg.norm(phi)
    pair = (CZ_MAT @ np.kron(PLUS, PLUS)).reshape(2, 2)  # [b, c]
    weights = []
    for m in range(basis.shape[1]):
        after_c = pair @ basis[:, m].conj()  # state left on B
        full = np.kron(phi, after_c)  # [a, b]
        amp = np.kron(PLUS, PLUS).conj() @ (CZ_MAT @ full)
        weights.append(abs(amp) ** 2)
    w = np.array(weights)
    return w / w.sum()


__all__ = [
    "ACCZ",
    "ACX",
    "PCZ",
    "AcausalCircuit",
    "IdentityResult",
    "TeleportGadget",
    "apply_acausal_identity",
    "bell_branch",
    "expand_acausal",
    "gflow_schedule",
    "rewrite_acausal_to_ordinary",
    "sent_back_probabilities",
    "spt_gflow",
    "teleport_expand",
]
