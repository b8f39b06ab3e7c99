"""Trace calculus on the doubled Hilbert space.

Pairings of swap operators with probe tensor squares factor site by site, so
every overlap reduces to a closed form in the probe's two norms and the arc
size.  All returned overlaps are pre-scaled by d**-L: the raw quantities grow
like d**(L+|S|) and would leave double range near L ~ 1000, while the scaled
ones stay representable for L <= 500 at d = 2 and pair against exponentially
small iteration coefficients.

A dense brute-force oracle on the explicit doubled space backs the closed
forms for small rings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Arc, ChainGeometry, arc_contains, arc_sites
from .operators import LocalOperator, op_norms

DENSE_ORACLE_MAX_DIM = 4096  # doubled-space dimension d**(2L)


def q_overlap(geom: ChainGeometry, arc: Arc, q_site: int, op_q: LocalOperator) -> float:
    """Scaled pairing of the swap on ``arc`` with the probe square at ``q_site``.

    Depends on the arc only through its size and whether it covers the probe:
    covered sites contribute the squared trace, uncovered ones the trace of
    the square.
    """
    if not 0 <= q_site < geom.L:
        raise ValueError(f"site {q_site} outside [0, {geom.L})")
    d = geom.d
    tr = float(np.trace(op_q.matrix).real)
    tr_sq = float(np.trace(op_q.matrix @ op_q.matrix).real)
    if arc_contains(geom, arc, q_site):
        return float(d ** (arc.length - 2)) * tr**2
    return float(d ** (arc.length - 1)) * tr_sq


def op_op_overlap(
    op_p: LocalOperator, op_q: LocalOperator, geom: ChainGeometry, p: int, q: int
) -> float:
    """Scaled pairing of the two observable squares at distinct sites."""
    if p == q:
        raise ValueError("supports must be distinct sites")
    _, frob_p, _ = op_norms(op_p)
    _, frob_q, _ = op_norms(op_q)
    return frob_p**2 * frob_q**2 / geom.d**2


def r1_overlap(op_p: LocalOperator, op_q: LocalOperator, geom: ChainGeometry) -> float:
    """Scaled pairing of the averaged evolved square with the probe square.

    Takes no time argument: the single-copy average only shuffles weight
    between the operator and the identity on its own site, so the pairing
    with a disjoint probe never moves.
    """
    return op_op_overlap(op_p, op_q, geom, 0, 1)


@dataclass(frozen=True)
class OverlapTable:
    """Per-size swap overlaps for a fixed probe, pre-scaled by d**-L.

    ``delta_by_size`` is the covered/uncovered gap, non-negative for every
    positive probe by Cauchy-Schwarz.
    """

    geom: ChainGeometry
    q_site: int
    q1_by_size: np.ndarray
    q2_by_size: np.ndarray
    delta_by_size: np.ndarray


def overlap_table(geom: ChainGeometry, q_site: int, op_q: LocalOperator) -> OverlapTable:
    d, L = geom.d, geom.L
    tr = float(np.trace(op_q.matrix).real)
    tr_sq = float(np.trace(op_q.matrix @ op_q.matrix).real)
    sizes = np.arange(L + 1, dtype=float)
    q1 = d ** (sizes - 2) * tr**2
    q2 = d ** (sizes - 1) * tr_sq
    return OverlapTable(
        geom=geom, q_site=q_site, q1_by_size=q1, q2_by_size=q2, delta_by_size=q2 - q1
    )


# ---------------------------------------------------------------------------
# dense oracle on the explicit doubled space
# ---------------------------------------------------------------------------


def embed_site_operator(geom: ChainGeometry, op: LocalOperator, site: int) -> np.ndarray:
    """Dense d**L operator with ``op`` at ``site`` and identity elsewhere."""
    d = geom.d
    left = np.eye(d**site)
    right = np.eye(d ** (geom.L - site - 1))
    return np.kron(np.kron(left, op.matrix), right)


def _swap_permutation(d: int, n_sites: int, swap_sites) -> np.ndarray:
    """Index permutation of T_S on the doubled space of an n-site block.

    Basis index is x * d**n + y with x the copy-1 and y the copy-2
    multi-index; site 0 holds the most significant digit.
    """
    dim = d**n_sites
    idx = np.arange(dim * dim, dtype=np.int64)
    x, y = idx // dim, idx % dim
    for s in swap_sites:
        w = d ** (n_sites - 1 - s)
        dx = (x // w) % d
        dy = (y // w) % d
        x = x + (dy - dx) * w
        y = y + (dx - dy) * w
    return x * dim + y


def block_swap_matrix(d: int, n_sites: int, swap_sites) -> np.ndarray:
    """Explicit dense swap operator T_S on the doubled block space."""
    perm = _swap_permutation(d, n_sites, swap_sites)
    mat = np.zeros((perm.size, perm.size))
    mat[perm, np.arange(perm.size)] = 1.0
    return mat


def dense_swap_oracle(
    geom: ChainGeometry, arc: Arc, q_site: int, op_q: LocalOperator
) -> float:
    """Unscaled Tr(T_S O_q(x2) T_V) from explicit doubled-space matrices.

    Brute force over every doubled basis state; guarded to d**(2L) <= 4096.
    """
    d, L = geom.d, geom.L
    dim2 = d ** (2 * L)
    if dim2 > DENSE_ORACLE_MAX_DIM:
        raise ValueError(f"doubled dimension {dim2} exceeds {DENSE_ORACLE_MAX_DIM}")
    t_arc = block_swap_matrix(d, L, arc_sites(geom, arc))
    t_full = block_swap_matrix(d, L, range(L))
    probe = embed_site_operator(geom, op_q, q_site)
    probe_sq = np.kron(probe, probe)
    return float(np.trace(t_arc @ probe_sq @ t_full).real)


# ---------------------------------------------------------------------------
# closed-form inner products of doubled-space basis elements
# ---------------------------------------------------------------------------
#
# An element spec is one of
#     ("id",)                  identity on the doubled space
#     ("op2", site, matrix)    O (x) O at `site`, identity elsewhere
#     ("swap", sites)          swap of the two copies over `sites`
# All are Hermitian, so <a, b> = Tr(a b) and the result is real.


def doubled_inner(geom: ChainGeometry, a_spec, b_spec) -> float:
    """Hilbert-Schmidt inner product of two doubled-space elements."""

    def site_data(spec, site):
        if spec[0] == "op2" and spec[1] == site:
            return np.asarray(spec[2]), False
        if spec[0] == "swap" and site in spec[1]:
            return None, True
        return None, False

    d = geom.d
    total = 1.0
    for site in range(geom.L):
        op_a, swap_a = site_data(a_spec, site)
        op_b, swap_b = site_data(b_spec, site)
        if op_a is None and op_b is None:
            prod = None
        elif op_a is None:
            prod = op_b
        elif op_b is None:
            prod = op_a
        else:
            prod = op_a @ op_b
        if swap_a == swap_b:
            # swaps cancel: per-site factor Tr(M)^2, with M the site product
            factor = float(d**2) if prod is None else float(np.trace(prod).real) ** 2
        else:
            # one swap survives: factor Tr(M^2)
            factor = float(d) if prod is None else float(np.trace(prod @ prod).real)
        total *= factor
    return total
