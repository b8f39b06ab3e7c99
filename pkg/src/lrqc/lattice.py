"""Ring geometry and the contiguous-arc basis.

An arc is an unbroken run of sites on a ring of L qudits.  The empty arc and
the full ring are absorbing ("sink") labels; every other arc admits exactly
four one-step moves: grow or shrink at either boundary.  The arcs index the
invariant operator subspace used by the moment iteration, so their
enumeration order is fixed and stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChainGeometry:
    """Ring of ``L`` qudits, each of local dimension ``d``."""

    L: int
    d: int

    def __post_init__(self) -> None:
        if self.L < 3:
            raise ValueError(f"ring needs at least 3 sites, got L={self.L}")
        if self.d < 2:
            raise ValueError(f"local dimension must be at least 2, got d={self.d}")

    @property
    def n_arcs(self) -> int:
        """Number of arcs on the ring, empty and full included."""
        return self.L * (self.L - 1) + 2


@dataclass(frozen=True)
class Arc:
    """Run of ``length`` consecutive sites beginning at ``start``.

    Length 0 is the empty arc and length L the full ring; both are stored
    with start 0 so equality is plain field equality.
    """

    start: int
    length: int


EMPTY_ARC = Arc(0, 0)


def full_arc(geom: ChainGeometry) -> Arc:
    return Arc(0, geom.L)


def make_arc(geom: ChainGeometry, start: int, length: int) -> Arc:
    """Canonical arc with validation against the given geometry."""
    if not 0 <= length <= geom.L:
        raise ValueError(f"arc length {length} outside [0, {geom.L}]")
    if length in (0, geom.L):
        return Arc(0, length)
    return Arc(start % geom.L, length)


def is_sink(geom: ChainGeometry, arc: Arc) -> bool:
    return arc.length == 0 or arc.length == geom.L


def arc_sites(geom: ChainGeometry, arc: Arc) -> tuple[int, ...]:
    return tuple((arc.start + k) % geom.L for k in range(arc.length))


def arc_contains(geom: ChainGeometry, arc: Arc, site: int) -> bool:
    return (site - arc.start) % geom.L < arc.length


def arc_enumerate(geom: ChainGeometry) -> list[Arc]:
    """All arcs ordered by length then start; empty first, full ring last."""
    arcs = [EMPTY_ARC]
    for length in range(1, geom.L):
        for start in range(geom.L):
            arcs.append(Arc(start, length))
    arcs.append(full_arc(geom))
    return arcs


def arc_index(geom: ChainGeometry, arc: Arc) -> int:
    """Position of ``arc`` in the :func:`arc_enumerate` order."""
    if arc.length == 0:
        return 0
    if arc.length == geom.L:
        return geom.L * (geom.L - 1) + 1
    return 1 + (arc.length - 1) * geom.L + arc.start % geom.L


def arc_lengths(geom: ChainGeometry) -> np.ndarray:
    """Vector of arc sizes |S| in enumeration order."""
    lengths = np.empty(geom.n_arcs, dtype=np.int64)
    lengths[0] = 0
    for length in range(1, geom.L):
        lo = 1 + (length - 1) * geom.L
        lengths[lo : lo + geom.L] = length
    lengths[-1] = geom.L
    return lengths


def arc_starts(geom: ChainGeometry) -> np.ndarray:
    starts = np.zeros(geom.n_arcs, dtype=np.int64)
    for length in range(1, geom.L):
        lo = 1 + (length - 1) * geom.L
        starts[lo : lo + geom.L] = np.arange(geom.L)
    return starts


def contains_site_mask(geom: ChainGeometry, site: int) -> np.ndarray:
    """Boolean vector over the arc basis: does the arc cover ``site``?"""
    starts = arc_starts(geom)
    lengths = arc_lengths(geom)
    return ((site - starts) % geom.L) < lengths


def chain_distance(geom: ChainGeometry, p: int, q: int) -> int:
    """Shortest site-to-site distance around the ring."""
    for s in (p, q):
        if not 0 <= s < geom.L:
            raise ValueError(f"site {s} outside [0, {geom.L})")
    step = abs(p - q)
    return min(step, geom.L - step)


def derived_neighbors(geom: ChainGeometry, arc: Arc) -> list[Arc]:
    """One-step images of a non-sink arc: grow-left, grow-right, shrink-left,
    shrink-right, duplicates kept with multiplicity.

    A length-1 arc shrinks to the empty arc through both boundaries and a
    length-(L-1) arc grows to the full ring through both, so sinks can appear
    twice.  Sink inputs are rejected: they have no outgoing moves.
    """
    if is_sink(geom, arc):
        raise ValueError("sink arcs (empty, full ring) have no outgoing moves")
    s, n = arc.start, arc.length
    return [
        make_arc(geom, s - 1, n + 1),  # grow-left
        make_arc(geom, s, n + 1),      # grow-right
        make_arc(geom, s + 1, n - 1),  # shrink-left
        make_arc(geom, s, n - 1),      # shrink-right
    ]


def _sink_boundary(geom: ChainGeometry, sink: Arc) -> list[Arc]:
    # Arcs adjacent to a sink: all length-1 arcs for the empty arc, all
    # length-(L-1) arcs for the full ring.
    length = 1 if sink.length == 0 else geom.L - 1
    return [Arc(s, length) for s in range(geom.L)]


def derived_distance(geom: ChainGeometry, a: Arc, b: Arc) -> int:
    """Breadth-first distance between arcs on the derived move graph.

    Sinks are absorbing: they may terminate a path but never sit in its
    interior, matching the support of the coefficient flow (weight that
    reaches a sink stays there).  Distances to and from sinks are therefore
    endpoint distances and the function is symmetric in its arguments.
    """
    for arc in (a, b):
        if not 0 <= arc.length <= geom.L:
            raise ValueError(f"invalid arc {arc} for L={geom.L}")
    if a == b:
        return 0
    if is_sink(geom, a) and is_sink(geom, b):
        # No interior sinks allowed, so route through the boundary of `a`.
        return 1 + min(derived_distance(geom, n, b) for n in _sink_boundary(geom, a))
    if is_sink(geom, a):
        a, b = b, a  # BFS from the non-sink endpoint
    dist = {a: 0}
    frontier = [a]
    while frontier:
        nxt = []
        for node in frontier:
            for nb in derived_neighbors(geom, node):
                if nb in dist:
                    continue
                dist[nb] = dist[node] + 1
                if nb == b:
                    return dist[nb]
                if not is_sink(geom, nb):
                    nxt.append(nb)
        frontier = nxt
    raise RuntimeError(f"arc {b} unreachable from {a}")  # pragma: no cover
