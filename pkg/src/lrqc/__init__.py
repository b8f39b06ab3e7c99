"""Correlation-spreading bounds for local random quantum circuits on rings.

The analytic path iterates a sparse moment matrix on the contiguous-arc
basis and evaluates an exact dynamical bound on the ensemble-averaged
commutator norm for rings of hundreds of sites; the Monte Carlo path samples
circuits densely on small rings and serves as the independent oracle.
"""

from .lattice import (
    Arc,
    ChainGeometry,
    arc_enumerate,
    arc_index,
    chain_distance,
    derived_distance,
    derived_neighbors,
    make_arc,
)
from .operators import (
    LocalOperator,
    ModelConstants,
    asymptotic_max,
    channel_amplitudes,
    diagonal_operator,
    local_operator,
    model_constants,
    op_norms,
)
from .swapcalc import (
    OverlapTable,
    dense_swap_oracle,
    op_op_overlap,
    overlap_table,
    q_overlap,
    r1_overlap,
)
from .moments import (
    MomentMatrix,
    SwapCoefficients,
    a_coefficients,
    build_moment_matrix,
    iterate_coefficients,
    r1_image,
    r2_image,
)
from .bounds import (
    BoundSeries,
    RegimeBound,
    RegimeConstants,
    a_star_estimate,
    bound_series,
    diffusive_leading_term,
    eta_max_exact,
    long_time_bound,
    regime_constants,
    short_time_bound,
    time_scales,
)
from .montecarlo import (
    CircuitSample,
    EtaEstimate,
    eta_mc,
    haar_unitary,
    heisenberg_evolve,
    one_step_r2_check,
    sample_circuit,
)

__version__ = "0.1.0"
