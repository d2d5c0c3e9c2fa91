"""Small named open graphs used throughout the tests and documentation."""

from __future__ import annotations

import math

from mbqc_circuits.graph import LoadedGraph, OpenGraph, SymbolTable

FIG2_NAMES = ("i1", "i2", "i3", "o1", "o2", "o3")
I1, I2, I3, O1, O2, O3 = range(6)


def g_triv() -> OpenGraph:
    return OpenGraph.create([1], [], [1], [1])


def g_line() -> OpenGraph:
    return OpenGraph.create([1, 2], [(1, 2)], [1], [2])


def g_line3() -> OpenGraph:
    return OpenGraph.create([1, 2, 3], [(1, 2), (2, 3)], [1], [3])


def g_nogflow() -> OpenGraph:
    return OpenGraph.create([1, 2], [], [1], [2])


def g_fig2() -> OpenGraph:
    """Three inputs, three outputs; gflow of depth one but no flow.

    Vertex ids follow ``FIG2_NAMES``: ``i1, i2, i3, o1, o2, o3 -> 0..5``.
    """
    edges = [(I1, O1), (I2, O1), (I3, O1), (I1, O2), (I2, O2), (I2, O3), (I3, O3)]
    return OpenGraph.create(range(6), edges, [I1, I2, I3], [O1, O2, O3])


def g_fig2_loaded(angles: dict[int, float] | None = None) -> LoadedGraph:
    if angles is None:
        angles = {I1: math.pi / 4, I2: math.pi / 3, I3: math.pi / 7}
    return LoadedGraph(g_fig2(), dict(angles), SymbolTable(FIG2_NAMES))
