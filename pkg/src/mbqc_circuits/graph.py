"""Open graphs and GF(2) vertex-set algebra.

Vertex sets are bitsets over the ascending vertex order of one graph. Every
flow and gflow computation in the package reduces to symmetric differences and
odd neighbourhoods of such sets, plus small linear systems over GF(2).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Mapping, Sequence


@dataclass(frozen=True)
class VertexSet:
    """Subset of the vertex universe of one open graph, stored as a bitset.

    Bit ``k`` of ``bits`` is set when ``universe[k]`` belongs to the set.
    Binary operations between sets of different universes raise ``ValueError``.

    Parameters
    ----------
    universe : tuple[int, ...]
        Ascending vertex ids of the owning graph.
    bits : int
        Membership bitmask.
    """

    universe: tuple[int, ...]
    bits: int = 0

    def _check(self, other: VertexSet) -> None:
        if self.universe is not other.universe and self.universe != other.universe:
            raise ValueError("vertex sets belong to different graphs")

    def __xor__(self, other: VertexSet) -> VertexSet:
        self._check(other)
        return VertexSet(self.universe, self.bits ^ other.bits)

    def __and__(self, other: VertexSet) -> VertexSet:
        self._check(other)
        return VertexSet(self.universe, self.bits & other.bits)

    def __or__(self, other: VertexSet) -> VertexSet:
        self._check(other)
        return VertexSet(self.universe, self.bits | other.bits)

    def __sub__(self, other: VertexSet) -> VertexSet:
        self._check(other)
        return VertexSet(self.universe, self.bits & ~other.bits)

    def __iter__(self) -> Iterator[int]:
        bits = self.bits
        while bits:
            low = bits & -bits
            yield self.universe[low.bit_length() - 1]
            bits ^= low

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __bool__(self) -> bool:
        return self.bits != 0

    def __contains__(self, v: object) -> bool:
        return v in self.ids()

    def ids(self) -> frozenset[int]:
        """Return the members as a plain frozenset."""
        return frozenset(self)

    def __repr__(self) -> str:
        return f"VertexSet({sorted(self)})"


@dataclass(frozen=True)
class OpenGraph:
    """Undirected graph with designated input and output vertices.

    The constructor stores data as given so that malformed graphs can be
    inspected with :func:`validate_open_graph`. Use :meth:`create` to build a
    graph that is checked on construction.

    Parameters
    ----------
    vertices : tuple[int, ...]
        Vertex ids, kept in ascending order.
    edges : tuple[tuple[int, int], ...]
        Undirected edges, each stored with the smaller endpoint first.
    inputs : frozenset[int]
        Input set ``I``.
    outputs : frozenset[int]
        Output set ``O``.
    """

    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    inputs: frozenset[int]
    outputs: frozenset[int]
    _index: dict[int, int] = field(init=False, repr=False, compare=False)
    _adj: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        verts = tuple(sorted(set(self.vertices)))
        edges = tuple(sorted((min(u, v), max(u, v)) for u, v in self.edges))
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", frozenset(self.outputs))
        index = {v: k for k, v in enumerate(verts)}
        adj = [0] * len(verts)
        for u, v in edges:
            if u == v or u not in index or v not in index:
                continue
            adj[index[u]] ^= 1 << index[v]
            adj[index[v]] ^= 1 << index[u]
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_adj", tuple(adj))

    @classmethod
    def create(
        cls,
        vertices: Iterable[int],
        edges: Iterable[tuple[int, int]],
        inputs: Iterable[int],
        outputs: Iterable[int],
    ) -> OpenGraph:
        """Build a graph and raise ``ValueError`` if it is malformed."""
        g = cls(tuple(vertices), tuple(tuple(e) for e in edges), frozenset(inputs), frozenset(outputs))
        report = validate_open_graph(g)
        if not report.ok:
            raise ValueError("invalid open graph: " + "; ".join(report.violations))
        return g

    # set helpers -----------------------------------------------------------

    def vset(self, ids: Iterable[int] = ()) -> VertexSet:
        """Return the :class:`VertexSet` of ``ids`` over this graph."""
        bits = 0
        for v in ids:
            try:
                bits |= 1 << self._index[v]
            except KeyError:
                raise ValueError(f"vertex {v} is not in the graph") from None
        return VertexSet(self.vertices, bits)

    def neighbors(self, v: int) -> frozenset[int]:
        """Return ``N(v)``."""
        return self.vset_from_bits(self._adj[self._index[v]]).ids()

    def vset_from_bits(self, bits: int) -> VertexSet:
        return VertexSet(self.vertices, bits)

    def bits_of(self, ids: Iterable[int]) -> int:
        return self.vset(ids).bits

    def odd(self, ids: Iterable[int]) -> frozenset[int]:
        """Odd neighbourhood of a plain vertex collection."""
        return odd_neighborhood(self, self.vset(ids)).ids()

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self._adj[self._index[u]] >> self._index[v] & 1)

    @property
    def non_inputs(self) -> frozenset[int]:
        return frozenset(self.vertices) - self.inputs

    @property
    def non_outputs(self) -> frozenset[int]:
        return frozenset(self.vertices) - self.outputs

    # constructions ---------------------------------------------------------

    def without_vertices(self, removed: Iterable[int], outputs: Iterable[int] | None = None) -> OpenGraph:
        """Induced subgraph on ``V \\ removed``, optionally with new outputs."""
        gone = frozenset(removed)
        keep = tuple(v for v in self.vertices if v not in gone)
        edges = tuple(e for e in self.edges if e[0] not in gone and e[1] not in gone)
        outs = self.outputs - gone if outputs is None else frozenset(outputs)
        return OpenGraph(keep, edges, self.inputs - gone, outs)

    def with_edges(self, edges: Iterable[tuple[int, int]]) -> OpenGraph:
        """Same vertices and I/O sets with a new edge set."""
        return OpenGraph(self.vertices, tuple(edges), self.inputs, self.outputs)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_open_graph`."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_open_graph(g: OpenGraph) -> ValidationReport:
    """Check the structural invariants of an open graph.

    Parameters
    ----------
    g : OpenGraph
        Graph to inspect.

    Returns
    -------
    ValidationReport
        Empty when the graph is well formed, else one message per violation.
    """
    vs = set(g.vertices)
    out: list[str] = []
    if not g.inputs <= vs:
        out.append("inputs ⊄ V")
    if not g.outputs <= vs:
        out.append("outputs ⊄ V")
    seen: set[tuple[int, int]] = set()
    for u, v in g.edges:
        if u == v:
            out.append(f"self-loop at {u}")
        elif u not in vs or v not in vs:
            out.append(f"dangling edge endpoint in ({u}, {v})")
        elif (u, v) in seen:
            out.append(f"duplicate edge ({u}, {v})")
        seen.add((u, v))
    return ValidationReport(tuple(out))


def odd_neighborhood(g: OpenGraph, s: VertexSet) -> VertexSet:
    """Return ``Odd(s)``, the vertices with an odd number of neighbours in ``s``.

    Computed as the GF(2) sum of the adjacency rows of the members.

    Raises
    ------
    ValueError
        If ``s`` is not a subset of the graph's vertices.
    """
    if s.universe != g.vertices:
        raise ValueError("vertex set is not a subset of the graph")
    acc = 0
    bits = s.bits
    while bits:
        low = bits & -bits
        acc ^= g._adj[low.bit_length() - 1]
        bits ^= low
    return VertexSet(g.vertices, acc)


# GF(2) linear algebra -------------------------------------------------------


def _rank(rows: Iterable[int]) -> int:
    basis: list[int] = []
    for r in rows:
        for b in basis:
            r = min(r, r ^ b)
        if r:
            basis.append(r)
    return len(basis)


def is_basis(family: Sequence[VertexSet], target: VertexSet) -> bool:
    """True iff the restrictions of ``family`` to ``target`` form a basis of it.

    Parameters
    ----------
    family : sequence of VertexSet
        Candidate basis vectors; only their intersection with ``target`` counts.
    target : VertexSet
        Space to be spanned.
    """
    if len(family) != len(target):
        return False
    rows = [(f & target).bits for f in family]
    return _rank(rows) == len(rows)


@dataclass(frozen=True)
class Gf2System:
    """Linear system ``A x = b`` over GF(2).

    Each row is a :class:`VertexSet` whose members are the columns with a
    nonzero coefficient; the unknown ``x`` is a subset of the same universe.

    Parameters
    ----------
    rows : tuple[VertexSet, ...]
        Coefficient rows, all over one universe.
    rhs : tuple[int, ...]
        Right-hand side bits, one per row.
    """

    rows: tuple[VertexSet, ...]
    rhs: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.rows) != len(self.rhs):
            raise ValueError("row and right-hand-side counts differ")
        if self.rows and any(r.universe != self.rows[0].universe for r in self.rows):
            raise ValueError("rows belong to different universes")
        if any(b not in (0, 1) for b in self.rhs):
            raise ValueError("right-hand side must be bits")


def solve_gf2_bits(rows: Sequence[int], rhs: Sequence[int]) -> int | None:
    """Solve a system given as integer bitmask rows; see :func:`solve_gf2`."""
    work = [(r, b & 1) for r, b in zip(rows, rhs)]
    pivots: list[tuple[int, int, int]] = []  # (column bit, row mask, rhs)
    ncols = max((r.bit_length() for r, _ in work), default=0)
    for col in range(ncols):
        bit = 1 << col
        for k, (r, b) in enumerate(work):
            if r & bit:
                break
        else:
            continue
        pr, pb = work.pop(k)
        work = [(r ^ pr, b ^ pb) if r & bit else (r, b) for r, b in work]
        pivots = [(c, r ^ pr, b ^ pb) if r & bit else (c, r, b) for c, r, b in pivots]
        pivots.append((bit, pr, pb))
    if any(b for r, b in work if r == 0):
        return None
    x = 0
    for bit, _, b in pivots:
        if b:
            x |= bit
    return x


def solve_gf2(system: Gf2System) -> VertexSet | None:
    """Return one solution of ``system`` or ``None`` when it is inconsistent.

    Elimination walks columns in ascending index order and takes the first
    remaining row with a nonzero entry as pivot. The result is read from the
    reduced row echelon form with every free variable set to zero.
    """
    if not system.rows:
        return None if any(system.rhs) else VertexSet((), 0)
    x = solve_gf2_bits([r.bits for r in system.rows], system.rhs)
    if x is None:
        return None
    return VertexSet(system.rows[0].universe, x)


# JSON I/O --------------------------------------------------------------------

_ANGLE_RE = re.compile(r"^\s*([+-]?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+))?\s*$")


def parse_angle(value: Any) -> float:
    """Parse a float or a ``"k*pi/n"`` string into radians."""
    if isinstance(value, bool):
        raise ValueError(f"invalid angle {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _ANGLE_RE.match(value)
        if m:
            k_txt, n_txt = m.groups()
            k = int(k_txt) if k_txt not in ("", "+", "-") else (-1 if k_txt == "-" else 1)
            n = int(n_txt) if n_txt else 1
            if n == 0:
                raise ValueError(f"invalid angle {value!r}")
            return k * math.pi / n
        try:
            return float(value)
        except ValueError:
            pass
    raise ValueError(f"invalid angle {value!r}")


@dataclass(frozen=True)
class SymbolTable:
    """Bijection between external vertex names and internal integer ids."""

    names: tuple[str, ...]

    def id_of(self, name: str) -> int:
        return self.names.index(name)

    def name_of(self, vid: int) -> str:
        return self.names[vid]


_GRAPH_KEYS = {"vertices", "edges", "inputs", "outputs", "angles"}


@dataclass(frozen=True)
class LoadedGraph:
    """A parsed graph file: the graph, its angles, and the name table."""

    graph: OpenGraph
    angles: dict[int, float]
    symbols: SymbolTable


def graph_from_dict(data: Mapping[str, Any]) -> LoadedGraph:
    """Parse the JSON graph schema.

    Vertex ids may be non-negative integers (used directly) or strings (mapped
    to ``0, 1, ...`` in order of appearance). Unknown keys are rejected.
    """
    if not isinstance(data, dict):
        raise ValueError("graph document must be an object")
    extra = set(data) - _GRAPH_KEYS
    if extra:
        raise ValueError(f"unknown keys: {sorted(extra)}")
    missing = {"vertices", "edges", "inputs", "outputs"} - set(data)
    if missing:
        raise ValueError(f"missing keys: {sorted(missing)}")
    raw = list(data["vertices"])
    if len(set(map(str, raw))) != len(raw):
        raise ValueError("duplicate vertex ids")
    if all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in raw):
        lookup: dict[str, int] = {str(v): v for v in raw}
        names = [""] * (max(raw, default=-1) + 1)
        for v in raw:
            names[v] = str(v)
        symbols = SymbolTable(tuple(names))
    elif all(isinstance(v, str) for v in raw):
        lookup = {v: k for k, v in enumerate(raw)}
        symbols = SymbolTable(tuple(raw))
    else:
        raise ValueError("vertex ids must be all non-negative integers or all strings")

    def conv(v: Any) -> int:
        key = str(v)
        if key not in lookup:
            raise ValueError(f"unknown vertex {v!r}")
        return lookup[key]

    edges = []
    for e in data["edges"]:
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise ValueError(f"malformed edge {e!r}")
        edges.append((conv(e[0]), conv(e[1])))
    g = OpenGraph.create(
        [lookup[str(v)] for v in raw],
        edges,
        [conv(v) for v in data["inputs"]],
        [conv(v) for v in data["outputs"]],
    )
    angles = {conv(k): parse_angle(a) for k, a in data.get("angles", {}).items()}
    return LoadedGraph(g, angles, symbols)


def load_graph(text: str) -> LoadedGraph:
    """Parse a JSON graph document from a string."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from None
    return graph_from_dict(data)


def graph_to_dict(g: OpenGraph, angles: Mapping[int, float] | None = None) -> dict[str, Any]:
    """Serialise a graph to the JSON schema with integer ids."""
    out: dict[str, Any] = {
        "vertices": list(g.vertices),
        "edges": [list(e) for e in g.edges],
        "inputs": sorted(g.inputs),
        "outputs": sorted(g.outputs),
    }
    if angles:
        out["angles"] = {str(k): angles[k] for k in sorted(angles)}
    return out
