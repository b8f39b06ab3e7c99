"""Brute-force circuit sampling on small rings.

Samples circuit realizations (uniform random edge, then a Haar-random
two-qudit gate, per step), evolves observables densely in the Heisenberg
picture, and estimates the averaged commutator norm with error bars.  Doubles
as the statistical oracle for the analytic twirl amplitudes and the one-step
image of the two-copy average.

Everything is reproducible: the RNG stream of sample ``i`` is derived from
``(master_seed, i)``, never from execution order, so estimates are
bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lattice import ChainGeometry
from .operators import LocalOperator, channel_amplitudes, model_constants
from .swapcalc import block_swap_matrix, doubled_inner, embed_site_operator

MAX_DENSE_DIM = 256  # full-space dimension d**L for dense evolution
UNITARITY_ATOL = 1e-10


def rng_for_sample(master_seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible stream for one sample."""
    return np.random.default_rng([master_seed, index])


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix.

    The triangular factor's diagonal phases are divided out; without that
    correction the QR convention biases the distribution away from Haar.
    """
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    z /= math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def haar_batch(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of independent Haar unitaries, shape (count, dim, dim)."""
    z = rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal(
        (count, dim, dim)
    )
    z /= math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.einsum("bii->bi", r)
    return q * (diag / np.abs(diag))[:, None, :]


@dataclass(frozen=True)
class CircuitSample:
    """One circuit realization: edge choices and gates for each step."""

    geom: ChainGeometry
    t: int
    edges: tuple[int, ...]
    unitaries: tuple[np.ndarray, ...]
    seed_path: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if len(self.edges) != self.t or len(self.unitaries) != self.t:
            raise ValueError("edge and gate sequences must have length t")
        dim = self.geom.d ** 2
        eye = np.eye(dim)
        for u in self.unitaries:
            if np.max(np.abs(u.conj().T @ u - eye)) > UNITARITY_ATOL:
                raise ValueError("gate fails the unitarity check")


def sample_circuit(
    geom: ChainGeometry,
    t: int,
    rng: np.random.Generator,
    seed_path: tuple[int, int] | None = None,
) -> CircuitSample:
    """Draw t uniform edges, then t independent Haar gates."""
    if t < 0:
        raise ValueError("depth must be non-negative")
    edges = tuple(int(e) for e in rng.integers(0, geom.L, size=t))
    unitaries = tuple(haar_unitary(geom.d**2, rng) for _ in range(t))
    return CircuitSample(geom=geom, t=t, edges=edges, unitaries=unitaries, seed_path=seed_path)


def embed_two_site(u: np.ndarray, geom: ChainGeometry, edge: int) -> np.ndarray:
    """Dense full-space operator of a two-site gate on edge (edge, edge+1)."""
    L, d = geom.L, geom.d
    if edge < L - 1:
        return np.kron(np.kron(np.eye(d**edge), u), np.eye(d ** (L - 2 - edge)))
    # wrap-around edge (L-1, 0): build with sites ordered (L-1, 0, 1, ..)
    # and permute the site axes back to natural order
    full = np.kron(u, np.eye(d ** (L - 2))).reshape([d] * (2 * L))
    perm = list(range(1, L)) + [0]
    return full.transpose(perm + [ax + L for ax in perm]).reshape(d**L, d**L)


def _check_dense_guard(geom: ChainGeometry) -> None:
    if geom.d**geom.L > MAX_DENSE_DIM:
        raise ValueError(
            f"dense evolution limited to dimension {MAX_DENSE_DIM}, "
            f"got d**L = {geom.d**geom.L}; use the moment-matrix path instead"
        )


def heisenberg_evolve(op_embedded: np.ndarray, sample: CircuitSample) -> np.ndarray:
    """Conjugate a full-space observable through the sampled gate sequence."""
    _check_dense_guard(sample.geom)
    out = op_embedded
    for edge, u in zip(sample.edges, sample.unitaries):
        full = embed_two_site(u, sample.geom, edge)
        out = full.conj().T @ out @ full
    return out


def frob_commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    comm = a @ b - b @ a
    return float(np.sqrt(np.sum(np.abs(comm) ** 2)))


def spectral_commutator_norm_sq(a: np.ndarray, b: np.ndarray) -> float:
    """Squared commutator norm from the eigenbasis of the first argument.

    Cross-check form: sums squared matrix elements of ``b`` between
    eigenvectors of ``a`` weighted by squared eigenvalue gaps.
    """
    vals, vecs = np.linalg.eigh(a)
    b_rot = vecs.conj().T @ b @ vecs
    gaps = vals[:, None] - vals[None, :]
    return float(np.sum(gaps**2 * np.abs(b_rot) ** 2))


def edges_connect(geom: ChainGeometry, edges, p: int, q: int) -> bool:
    """Can support starting at p reach q through the given edge sequence?"""
    supp = np.zeros(geom.L, dtype=bool)
    supp[p] = True
    for e in edges:
        a, b = e, (e + 1) % geom.L
        if supp[a] or supp[b]:
            supp[a] = supp[b] = True
    return bool(supp[q])


@dataclass(frozen=True)
class EtaEstimate:
    """Sample mean and standard error of the scaled commutator norm."""

    mean: float
    stderr: float
    n_samples: int
    per_t: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.mean < 0 or self.stderr < 0:
            raise ValueError("estimate must be non-negative")


def _norms_for_sample(
    geom: ChainGeometry,
    op_p_full: np.ndarray,
    probes: list[np.ndarray],
    times: list[int],
    t_max: int,
    master_seed: int,
    index: int,
    scale: float,
) -> np.ndarray:
    rng = rng_for_sample(master_seed, index)
    sample = sample_circuit(geom, t_max, rng, seed_path=(master_seed, index))
    out = np.empty((len(times), len(probes)))
    t_pos = {t: i for i, t in enumerate(times)}
    evolved = op_p_full
    if 0 in t_pos:
        for qi, probe in enumerate(probes):
            out[t_pos[0], qi] = frob_commutator_norm(evolved, probe) / scale
    for step in range(1, t_max + 1):
        full = embed_two_site(sample.unitaries[step - 1], geom, sample.edges[step - 1])
        evolved = full.conj().T @ evolved @ full
        if step in t_pos:
            for qi, probe in enumerate(probes):
                out[t_pos[step], qi] = frob_commutator_norm(evolved, probe) / scale
    return out


def eta_mc_grid(
    op_p: LocalOperator,
    op_q: LocalOperator,
    geom: ChainGeometry,
    p: int,
    q_sites,
    times,
    n_samples: int,
    master_seed: int,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and stderr of the scaled commutator norm over a (t, q) grid.

    All grid points share the same circuit samples; returned arrays have
    shape (len(times), len(q_sites)).
    """
    _check_dense_guard(geom)
    if n_samples < 2:
        raise ValueError("need at least 2 samples for an error bar")
    times = [int(t) for t in times]
    if any(t < 0 for t in times):
        raise ValueError("times must be non-negative")
    if len(set(times)) != len(times):
        raise ValueError("times must be unique")
    q_sites = list(q_sites)
    op_p_full = embed_site_operator(geom, op_p, p)
    probes = [embed_site_operator(geom, op_q, q) for q in q_sites]
    scale = math.sqrt(float(geom.d) ** geom.L)
    t_max = max(times)
    vals = np.empty((n_samples, len(times), len(q_sites)))

    def fill(lo: int, hi: int) -> None:
        for idx in range(lo, hi):
            vals[idx] = _norms_for_sample(
                geom, op_p_full, probes, times, t_max, master_seed, idx, scale
            )

    if threads <= 1:
        fill(0, n_samples)
    else:
        chunk = -(-n_samples // threads)
        ranges = [
            (lo, min(lo + chunk, n_samples)) for lo in range(0, n_samples, chunk)
        ]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda r: fill(*r), ranges))
    means = vals.mean(axis=0)
    stderrs = vals.std(axis=0, ddof=1) / math.sqrt(n_samples)
    return means, stderrs


def eta_mc(
    op_p: LocalOperator,
    op_q: LocalOperator,
    geom: ChainGeometry,
    p: int,
    q: int,
    t: int,
    n_samples: int,
    master_seed: int,
    record_trajectory: bool = False,
    threads: int = 1,
) -> EtaEstimate:
    """Monte Carlo estimate of the scaled averaged commutator norm at (q, t)."""
    times = list(range(t + 1)) if record_trajectory else [t]
    means, stderrs = eta_mc_grid(
        op_p, op_q, geom, p, [q], times, n_samples, master_seed, threads=threads
    )
    per_t = None
    if record_trajectory:
        per_t = (np.array(times), means[:, 0].copy(), stderrs[:, 0].copy())
    return EtaEstimate(
        mean=float(means[-1, 0]),
        stderr=float(stderrs[-1, 0]),
        n_samples=n_samples,
        per_t=per_t,
    )


# ---------------------------------------------------------------------------
# statistical oracles for the analytic channel amplitudes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwirlEstimate:
    """Projected identity/swap weights of the averaged boundary move."""

    coeff_identity: float
    stderr_identity: float
    coeff_swap: float
    stderr_swap: float
    n_samples: int


def half_swap_twirl_estimate(
    d: int, n_samples: int, master_seed: int, batch: int = 512
) -> TwirlEstimate:
    """Average the two-copy conjugation of a one-site copy swap on an edge.

    The mean lands on span{identity, full edge swap} with equal weights, the
    off-diagonal-move weight of the moment matrix times the ring length.
    The identity weight is read off the sampled mean's diagonal away from
    the swap support and the swap weight off the pure swap entries; traces
    against the span itself are conjugation-invariant and carry no
    statistical information, so they are deliberately avoided.
    """
    dim2 = d**2
    off = ~np.eye(dim2, dtype=bool)  # copy-index pairs outside the swap diagonal
    rng = np.random.default_rng(master_seed)
    id_est = np.empty(n_samples)
    swap_est = np.empty(n_samples)
    done = 0
    while done < n_samples:
        b = min(batch, n_samples - done)
        u = haar_batch(dim2, b, rng)
        # probed entries of the conjugated swap contract to small Gram forms:
        # diagonal (a,c): Tr(G_a G_c) with G_a = V_a V_a^dag, V_a = row a of U
        # reshaped by the site-0/site-1 split; pure-swap (a,c)->(c,a): the
        # squared magnitude sum of the cross Gram V_a V_c^dag blocks.
        v = u.reshape(b, dim2, d, d)
        gram = np.einsum("bapq,barq->bapr", v, v.conj())
        diag = np.einsum("bapr,bcrp->bac", gram, gram).real
        cross = np.einsum("bapq,bcrq->bacpr", v, v.conj())
        swapped = (cross.real**2 + cross.imag**2).sum(axis=(3, 4))
        id_est[done : done + b] = diag[:, off].mean(axis=1)
        swap_est[done : done + b] = swapped[:, off].mean(axis=1)
        done += b
    return TwirlEstimate(
        coeff_identity=float(id_est.mean()),
        stderr_identity=float(id_est.std(ddof=1) / math.sqrt(n_samples)),
        coeff_swap=float(swap_est.mean()),
        stderr_swap=float(swap_est.std(ddof=1) / math.sqrt(n_samples)),
        n_samples=n_samples,
    )


def _two_copy_batch(u: np.ndarray) -> np.ndarray:
    """Batched kron(U, U) over a stack of unitaries."""
    b, n, _ = u.shape
    return np.einsum("bij,bkl->bikjl", u, u).reshape(b, n * n, n * n)


def _perm_of(perm_matrix: np.ndarray) -> np.ndarray:
    """Index map sigma with M|j> = |sigma(j)>, for a 0/1 permutation matrix."""
    return np.argmax(perm_matrix, axis=0)


@dataclass(frozen=True)
class OneStepReport:
    """Entrywise comparison of the sampled edge twirl with its closed form."""

    max_dev: float
    max_stderr: float
    max_standardized: float
    coeff_symmetric: float
    coeff_antisymmetric: float
    analytic_symmetric: float
    analytic_antisymmetric: float
    n_samples: int


def one_step_r2_check(
    op: LocalOperator, d: int, n_samples: int, master_seed: int
) -> OneStepReport:
    """Sampled two-copy edge twirl of the tensor square, entrywise.

    The closed form is an identity piece plus a full-edge-swap piece; the
    report also contracts the sample mean against the symmetric and
    antisymmetric projectors, whose weights are the sum and difference of
    the two amplitudes.
    """
    if d**4 > MAX_DENSE_DIM:
        raise ValueError("edge twirl check limited to d**4 <= 256")
    if op.dim != d:
        raise ValueError("operator dimension must equal d")
    op_edge = np.kron(op.matrix, np.eye(d))
    x = np.kron(op_edge, op_edge)
    n = d**4
    acc = np.zeros((n, n), dtype=complex)
    acc_sq = np.zeros((n, n))
    rng = np.random.default_rng(master_seed)
    done = 0
    while done < n_samples:
        b = min(512, n_samples - done)
        k = _two_copy_batch(haar_batch(d**2, b, rng))
        y = k @ x @ np.conj(np.swapaxes(k, 1, 2))
        acc += y.sum(axis=0)
        acc_sq += (y.real**2 + y.imag**2).sum(axis=0)
        done += b
    mean = acc / n_samples
    # per-entry complex spread: var(re) + var(im)
    var = acc_sq / n_samples - (mean.real**2 + mean.imag**2)
    stderr = np.sqrt(np.maximum(var, 0.0) / n_samples)
    amp_id, amp_swap = channel_amplitudes(op)
    t_edge = block_swap_matrix(d, 2, [0, 1])
    analytic = amp_id * np.eye(n) + amp_swap * t_edge
    dev = np.abs(mean - analytic)
    noisy = stderr > 0
    max_standardized = float((dev[noisy] / stderr[noisy]).max()) if noisy.any() else 0.0
    proj_plus = (np.eye(n) + t_edge) / 2
    proj_minus = (np.eye(n) - t_edge) / 2
    return OneStepReport(
        max_dev=float(dev.max()),
        max_stderr=float(stderr.max()),
        max_standardized=max_standardized,
        coeff_symmetric=float(np.trace(proj_plus @ mean).real / np.trace(proj_plus).real),
        coeff_antisymmetric=float(
            np.trace(proj_minus @ mean).real / np.trace(proj_minus).real
        ),
        analytic_symmetric=amp_id + amp_swap,
        analytic_antisymmetric=amp_id - amp_swap,
        n_samples=n_samples,
    )


@dataclass(frozen=True)
class FullMapReport:
    """Coefficient-level comparison of the sampled one-step map."""

    labels: tuple[str, ...]
    analytic: np.ndarray
    mc_mean: np.ndarray
    mc_stderr: np.ndarray
    n_samples: int

    def standardized(self) -> np.ndarray:
        return np.abs(self.mc_mean - self.analytic) / np.maximum(self.mc_stderr, 1e-30)


def one_step_full_map_check(
    op_p: LocalOperator,
    geom: ChainGeometry,
    p: int,
    n_samples: int,
    master_seed: int,
) -> FullMapReport:
    """Sample the full one-step map and project onto its invariant span.

    Each sample picks a uniform edge and a Haar gate; its image is projected
    onto {tensor square, identity, the two straddling swaps}.  The projected
    coefficient means estimate exactly the one-step expansion weights.
    """
    L, d = geom.L, geom.d
    consts = model_constants(op_p, geom)
    left_sites = frozenset(((p - 1) % L, p))
    right_sites = frozenset((p, (p + 1) % L))
    specs = [
        ("op2", p, op_p.matrix),
        ("id",),
        ("swap", left_sites),
        ("swap", right_sites),
    ]
    gram = np.array(
        [[doubled_inner(geom, a, b) for b in specs] for a in specs]
    )
    gram_inv = np.linalg.inv(gram)

    touching = {(p - 1) % L: 1, p: 0}  # edge -> slot of p within (edge, edge+1)
    # restriction of each basis element to a doubled edge block, paired with
    # the scalar trace contribution of all off-edge sites
    restricted: dict[int, list[tuple[np.ndarray, float]]] = {}
    x_blocks: dict[int, np.ndarray] = {}
    for edge, slot in touching.items():
        edge_sites = (edge, (edge + 1) % L)
        entries = []
        for spec in specs:
            mats = [np.eye(d), np.eye(d)]
            swaps = []
            if spec[0] == "op2":
                mats[edge_sites.index(spec[1])] = np.asarray(spec[2])
            elif spec[0] == "swap":
                swaps = [i for i, s in enumerate(edge_sites) if s in spec[1]]
            block = np.kron(mats[0], mats[1])
            restr = np.kron(block, block) @ block_swap_matrix(d, 2, swaps)
            off = 1.0
            for site in range(L):
                if site in edge_sites:
                    continue
                off *= d if (spec[0] == "swap" and site in spec[1]) else d**2
            entries.append((restr.conj().T, off))
        restricted[edge] = entries
        op_slot = (
            np.kron(op_p.matrix, np.eye(d))
            if slot == 0
            else np.kron(np.eye(d), op_p.matrix)
        )
        x_blocks[edge] = np.kron(op_slot, op_slot)

    coeffs = np.empty((n_samples, 4))
    untouched = np.array([1.0, 0.0, 0.0, 0.0])
    for idx in range(n_samples):
        rng = rng_for_sample(master_seed, idx)
        edge = int(rng.integers(0, L))
        u = haar_unitary(d**2, rng)
        if edge not in touching:
            coeffs[idx] = untouched
            continue
        k = np.kron(u, u)
        y = k @ x_blocks[edge] @ k.conj().T
        v = np.array(
            [float(np.sum(r_dag * y.T).real) * off for r_dag, off in restricted[edge]]
        )
        coeffs[idx] = gram_inv @ v
    mean = coeffs.mean(axis=0)
    stderr = coeffs.std(axis=0, ddof=1) / math.sqrt(n_samples)
    analytic = np.array(
        [consts.r, 2 * consts.A / L, consts.B / L, consts.B / L]
    )
    return FullMapReport(
        labels=("tensor_square", "identity", "swap_left", "swap_right"),
        analytic=analytic,
        mc_mean=mean,
        mc_stderr=stderr,
        n_samples=n_samples,
    )
