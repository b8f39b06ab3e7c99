"""First- and second-moment superoperators on the arc basis.

The two-copy average of the dynamics preserves the span of the observable
tensor square together with the swaps on contiguous arcs.  Restricted to that
span it is a sparse non-negative matrix M: each non-sink column carries the
survival probability r on the diagonal and weight u to each of the four
grow/shrink moves, while the empty and full arcs are fixed points that absorb
weight.  Iterating M and discounting the history by powers of r yields the
exact expansion coefficients of the evolved tensor square.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lattice import (
    Arc,
    ChainGeometry,
    arc_enumerate,
    arc_index,
    arc_lengths,
    derived_neighbors,
    is_sink,
    make_arc,
)
from .operators import LocalOperator, ModelConstants, model_constants


@dataclass(frozen=True)
class MomentMatrix:
    """Sparse one-step transfer matrix on the arc basis.

    ``matrix[i, j]`` is the weight flowing from arc j to arc i in one step;
    columns of the two sinks are unit vectors.
    """

    geom: ChainGeometry
    dim: int
    matrix: sp.csr_matrix

    def entry(self, row_arc: Arc, col_arc: Arc) -> float:
        i = arc_index(self.geom, row_arc)
        j = arc_index(self.geom, col_arc)
        return float(self.matrix[i, j])

    def sink_deleted(self) -> np.ndarray:
        """Dense copy of M with the sink rows and columns removed."""
        keep = [
            arc_index(self.geom, a)
            for a in arc_enumerate(self.geom)
            if not is_sink(self.geom, a)
        ]
        dense = self.matrix.toarray()
        return dense[np.ix_(keep, keep)]


def build_moment_matrix(geom: ChainGeometry) -> MomentMatrix:
    """Assemble M from the two-site average applied at each boundary edge.

    An edge interior or exterior to an arc leaves its swap alone; an edge
    straddling a boundary splits the weight, sending u to the grown and u to
    the shrunk arc.  With two boundaries per non-sink arc that is four
    off-diagonal contributions of u, merged by destination.
    """
    L, d = geom.L, geom.d
    r = (L - 2) / L
    u = d / ((d**2 + 1) * L)
    rows, cols, vals = [], [], []
    for arc in arc_enumerate(geom):
        j = arc_index(geom, arc)
        if is_sink(geom, arc):
            rows.append(j)
            cols.append(j)
            vals.append(1.0)
            continue
        rows.append(j)
        cols.append(j)
        vals.append(r)
        for nb in derived_neighbors(geom, arc):
            rows.append(arc_index(geom, nb))
            cols.append(j)
            vals.append(u)
    dim = geom.n_arcs
    matrix = sp.csr_matrix(
        sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=float)
    )
    return MomentMatrix(geom=geom, dim=dim, matrix=matrix)


def basis_vector(geom: ChainGeometry, arc: Arc) -> np.ndarray:
    vec = np.zeros(geom.n_arcs)
    vec[arc_index(geom, arc)] = 1.0
    return vec


def fiducial_arcs(geom: ChainGeometry, p: int) -> tuple[Arc, Arc]:
    """The two seed arcs straddling site p: {p-1, p} and {p, p+1}."""
    return make_arc(geom, p - 1, 2), make_arc(geom, p, 2)


def iterate_coefficients(M: MomentMatrix, c0: np.ndarray, t: int) -> list[np.ndarray]:
    """The coefficient trajectory c, Mc, ..., M**t c."""
    if t < 0:
        raise ValueError("step count must be non-negative")
    c0 = np.asarray(c0, dtype=float)
    if c0.shape != (M.dim,):
        raise ValueError(f"coefficient vector must have length {M.dim}")
    out = [c0.copy()]
    for _ in range(t):
        out.append(M.matrix @ out[-1])
    return out


def discounted_history(
    M: MomentMatrix, c0: np.ndarray, times
) -> dict[int, np.ndarray]:
    """Sum of the coefficient history discounted by the survival probability.

    For each requested t returns a(., t) = sum_{l<t} r**l M**(t-1-l) c0 via
    the streaming recurrence a -> r a + c.  Times must be non-negative; t=0
    maps to the zero vector.
    """
    r = (M.geom.L - 2) / M.geom.L
    want = sorted(set(int(t) for t in times))
    if want and want[0] < 0:
        raise ValueError("times must be non-negative")
    snapshots: dict[int, np.ndarray] = {}
    a = np.zeros(M.dim)
    c = np.asarray(c0, dtype=float).copy()
    if want and want[0] == 0:
        snapshots[0] = a.copy()
    top = want[-1] if want else 0
    for step in range(1, top + 1):
        a = r * a + c
        c = M.matrix @ c
        if step in want:
            snapshots[step] = a.copy()
    return snapshots


def a_coefficients(M: MomentMatrix, geom: ChainGeometry, p: int, t: int) -> np.ndarray:
    """Combined discounted history seeded at both fiducial arcs of site p."""
    if t < 1:
        raise ValueError("need at least one step")
    left, right = fiducial_arcs(geom, p)
    c0 = basis_vector(geom, left) + basis_vector(geom, right)
    return discounted_history(M, c0, [t])[t]


def sink_weight_running_sum(
    M: MomentMatrix, c0: np.ndarray, t: int
) -> tuple[float, float]:
    """Sink values of the discounted history via the boundary-flux form.

    Each boundary arc feeds its sink with weight 2u per step, so the sink
    history equals 2u times the time-accumulated histories of its neighbors.
    Kept as an independent cross-check of the in-matrix sink columns.
    """
    geom = M.geom
    L, d = geom.L, geom.d
    u = d / ((d**2 + 1) * L)
    singles = [arc_index(geom, Arc(s, 1)) for s in range(L)]
    widest = [arc_index(geom, Arc(s, L - 1)) for s in range(L)]
    history = discounted_history(M, c0, range(1, t))
    acc_empty = sum(float(a_n[singles].sum()) for a_n in history.values())
    acc_full = sum(float(a_n[widest].sum()) for a_n in history.values())
    return 2 * u * acc_empty, 2 * u * acc_full


@dataclass(frozen=True)
class SwapCoefficients:
    """Expansion of the evolved tensor square over its invariant span.

    ``amp_op`` multiplies the untouched tensor square and ``amp_arcs`` the
    swap on each arc; the identity-channel weight is folded into the
    empty-arc entry.
    """

    amp_op: float
    amp_arcs: np.ndarray
    t: int


def r2_image(
    op_p: LocalOperator,
    geom: ChainGeometry,
    p: int,
    t: int,
    M: MomentMatrix | None = None,
    constants: ModelConstants | None = None,
) -> SwapCoefficients:
    """Coefficients of the t-step two-copy average of the tensor square."""
    if t < 0:
        raise ValueError("step count must be non-negative")
    if not 0 <= p < geom.L:
        raise ValueError(f"site {p} outside [0, {geom.L})")
    consts = constants if constants is not None else model_constants(op_p, geom)
    r, A, B, L = consts.r, consts.A, consts.B, geom.L
    amp_arcs = np.zeros(geom.n_arcs)
    rt = r**t
    if t > 0:
        mm = M if M is not None else build_moment_matrix(geom)
        amp_arcs = (B / L) * a_coefficients(mm, geom, p, t)
        amp_arcs[0] += (2 * A / L) * (1 - rt) / (1 - r)
    return SwapCoefficients(amp_op=rt, amp_arcs=amp_arcs, t=t)


def r1_image(op_p: LocalOperator, geom: ChainGeometry, t: int) -> tuple[float, float]:
    """Survival and depolarized weights of the t-step single-copy average."""
    if t < 0:
        raise ValueError("step count must be non-negative")
    r = (geom.L - 2) / geom.L
    rt = r**t
    frob_sq = float(np.trace(op_p.matrix @ op_p.matrix).real)
    return rt, (1 - rt) * frob_sq / geom.d


def scaled_trace(geom: ChainGeometry, op_p: LocalOperator, coeffs: SwapCoefficients) -> float:
    """Trace of the represented operator divided by the doubled dimension.

    The two-copy average is trace preserving, so this must equal the scaled
    trace of the input tensor square, Tr(O_p)**2 / d**2, at every t.
    """
    d = geom.d
    tr_p = float(np.trace(op_p.matrix).real)
    sizes = arc_lengths(geom).astype(float)
    return coeffs.amp_op * tr_p**2 / d**2 + float(
        np.sum(coeffs.amp_arcs * d ** (-sizes))
    )
