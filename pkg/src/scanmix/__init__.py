"""Exact and empirical mixing analysis for single-site coloring dynamics.

The library studies random single-site updates ("glauber") and deterministic
left-to-right sweeps ("scan") for proper q-colorings and general
constraint-graph colorings of paths and small graphs: exact transition
kernels and spectra, eigenvector-weighted mixing bounds for the auxiliary
sign chains, exact coupling drift ledgers, canonical-path congestion, and
clamped-versus-free disagreement experiments.
"""

__version__ = "0.1.0"

from .domain import (
    BudgetExceededError,
    Coloring,
    Graph,
    HeightFunction,
    ImproperColoringError,
    SignConfig,
    TargetGraph,
    VertexWeights,
    d1,
    d2,
    enumerate_colorings,
    enumerate_h_colorings,
    from_signs,
    geodesic,
    height_of,
    to_signs,
)
from .dynamics import (
    ChainSpec,
    RandomTape,
    glauber_step,
    metropolis_update,
    scan_sweep,
    sign_step,
)
from .kernels import (
    ChainKernel,
    NonErgodicError,
    SpectralReport,
    build_kernel,
    build_sign_kernel,
    poincare_constant,
    tv_mixing_time,
    verify_comparison,
)
from .congestion import canonical_congestion, ergodicity_report
from .coupling import (
    coupled_sweep,
    coupling_time,
    exact_drift,
    variance_floor_witness,
)
from .percolation import (
    lb_experiment,
    mid_color_prob,
    sample_pi0,
    segment_layout,
    transfer_count,
)
from .wilson import closed_form_eigen, estimate_rho, expectation_matrix, wilson_bounds
