"""Local site operators and the scalar constants of the averaged dynamics.

Everything the averaged evolution knows about an observable is carried by
two norms: the trace norm and the Frobenius norm.  Their squared ratio,
written ``x2`` for the evolved operator and ``y2`` for the probe, ranges
over [1, d] and saturates d only for multiples of the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import ChainGeometry

HERMITICITY_ATOL = 1e-12
PSD_ATOL = 1e-12


@dataclass(frozen=True)
class LocalOperator:
    """Positive semidefinite Hermitian operator on one qudit."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {m.shape} does not match dim={self.dim}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_ATOL:
            raise ValueError("operator is not Hermitian within 1e-12")
        if np.linalg.eigvalsh(m).min() < -PSD_ATOL:
            raise ValueError("operator has an eigenvalue below -1e-12")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def local_operator(matrix) -> LocalOperator:
    m = np.asarray(matrix, dtype=complex)
    return LocalOperator(dim=m.shape[0], matrix=m)


def diagonal_operator(values) -> LocalOperator:
    return local_operator(np.diag(np.asarray(values, dtype=complex)))


def op_norms(op: LocalOperator) -> tuple[float, float, float]:
    """Trace norm, Frobenius norm and their squared ratio ``x2``.

    For a positive operator the trace norm is just the trace.  The zero
    operator is rejected since the ratio is undefined.
    """
    eigs = np.linalg.eigvalsh(op.matrix)
    trace_norm = float(np.sum(np.abs(eigs)))
    frobenius = float(np.sqrt(np.sum(eigs**2)))
    if frobenius == 0.0:
        raise ValueError("zero operator: norm ratio undefined")
    return trace_norm, frobenius, (trace_norm / frobenius) ** 2


@dataclass(frozen=True)
class ModelConstants:
    """Scalars controlling the averaged one-step update on the ring.

    ``r`` is the probability that a uniformly drawn edge misses the operator
    support, ``u`` the weight carried to each grown or shrunk arc by an edge
    straddling a swap boundary, and ``n_d = u * L`` its size-free part.
    ``A`` and ``B`` are the identity- and swap-channel amplitudes generated
    when an edge hits the support.
    """

    r: float
    u: float
    n_d: float
    A: float
    B: float
    x2: float
    y2: float | None
    d: int
    L: int


def channel_amplitudes(op: LocalOperator) -> tuple[float, float]:
    """Identity and swap weights of the single-edge two-copy average.

    Averaging the two-copy conjugation of the tensor square over one edge
    that touches the support projects it onto the identity plus the swap of
    the edge; these are the two resulting amplitudes.
    """
    d = op.dim
    _, frob, x2 = op_norms(op)
    f2 = frob**2
    amp_id = f2 * (x2 * d**3 - 1) / (d * (d**4 - 1))
    amp_swap = f2 * (d - x2) / (d**4 - 1)
    return amp_id, amp_swap


def model_constants(
    op_p: LocalOperator, geom: ChainGeometry, op_q: LocalOperator | None = None
) -> ModelConstants:
    """Model constants for an evolved operator ``op_p`` on ``geom``.

    ``y2`` is populated only when the probe operator ``op_q`` is supplied.
    """
    if op_p.dim != geom.d:
        raise ValueError(f"operator dimension {op_p.dim} != geometry d={geom.d}")
    d, L = geom.d, geom.L
    x2 = op_norms(op_p)[2]
    r = (L - 2) / L
    n_d = d / (d**2 + 1)
    u = n_d / L
    A, B = channel_amplitudes(op_p)
    if not A > 0:
        raise ValueError("identity-channel amplitude must be positive for PSD input")
    y2 = None
    if op_q is not None:
        y2 = op_norms(op_q)[2]
    return ModelConstants(r=r, u=u, n_d=n_d, A=A, B=B, x2=x2, y2=y2, d=d, L=L)


def asymptotic_max(op_p: LocalOperator, op_q: LocalOperator, d: int) -> float:
    """Late-time plateau of the scaled correlation bound.

    Vanishes when either operator is proportional to the identity, which is
    invariant under the dynamics and correlates with nothing.
    """
    if op_p.dim != d or op_q.dim != d:
        raise ValueError("operator dimensions must equal d")
    _, frob_p, x2 = op_norms(op_p)
    _, frob_q, y2 = op_norms(op_q)
    radicand = 2.0 * max(d - x2, 0.0) * max(d - y2, 0.0)
    return np.sqrt(radicand) / d**2 * frob_p * frob_q
