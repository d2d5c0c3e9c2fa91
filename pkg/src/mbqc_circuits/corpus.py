"""Seeded random open graphs with gflow, used by tests and the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mbqc_circuits.flow import find_max_delayed_gflow
from mbqc_circuits.graph import OpenGraph


_MAX_TRIES = 1000


@dataclass(frozen=True)
class CorpusEntry:
    """A random graph with gflow and its measurement angles."""

    index: int
    graph: OpenGraph
    angles: dict[int, float]


def random_open_graph(
    rng: np.random.Generator,
    n: int,
    max_outputs: int = 3,
    density: tuple[float, float] = (0.3, 0.7),
) -> OpenGraph:
    """Draw one open graph on ``n`` vertices; it may or may not have gflow.

    Each pair is an edge with a probability drawn uniformly from ``density``,
    ``|O|`` is uniform in ``[1, max_outputs]`` and ``|I|`` uniform in
    ``[0, |O|]``.
    """
    p = float(rng.uniform(*density))
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    n_out = int(rng.integers(1, min(max_outputs, n) + 1))
    n_in = int(rng.integers(0, n_out + 1))
    outputs = rng.choice(n, size=n_out, replace=False)
    inputs = rng.choice(n, size=n_in, replace=False)
    return OpenGraph.create(range(n), edges, inputs.tolist(), outputs.tolist())


def random_angles(rng: np.random.Generator, g: OpenGraph) -> dict[int, float]:
    """Angles ``kπ/7`` with ``k`` uniform in ``0..13`` for every non-output."""
    return {v: int(rng.integers(0, 14)) * math.pi / 7 for v in sorted(g.non_outputs)}


def gflow_corpus(
    seed: int,
    count: int,
    max_vertices: int = 10,
    max_outputs: int = 3,
    density: tuple[float, float] = (0.3, 0.7),
) -> list[CorpusEntry]:
    """``count`` random graphs with gflow drawn from ``seed``.

    The vertex count of each entry is drawn uniformly from
    ``[2, max_vertices]`` first and graphs of that size are redrawn until one
    has gflow, so large graphs are not crowded out by rejection.
    """
    rng = np.random.default_rng(seed)
    out: list[CorpusEntry] = []
    while len(out) < count:
        n = int(rng.integers(2, max_vertices + 1))
        for _ in range(_MAX_TRIES):
            g = random_open_graph(rng, n, max_outputs, density)
            if find_max_delayed_gflow(g) is not None:
                out.append(CorpusEntry(len(out), g, random_angles(rng, g)))
                break
    return out
