"""Monitored spinful Luttinger liquid toolkit.

Maps physical parameters to the complex couplings of the effective
non-hermitian sine-Gordon theory, integrates the one-loop BKT flow to
classify phases, solves the Gaussian fixed points for steady-state
correlation coefficients, and cross-checks against a desk-scale
quantum-trajectory lattice simulator.
"""

from .params import PhysicalParams, Couplings, bare_couplings, luttinger_from_exchange
from .rgflow import (
    FlowState,
    FlowTrace,
    Phase,
    PhasePoint,
    QuadSpec,
    StepSpec,
    analytic_boundary,
    classify_phase,
    f_coefficients,
    integrate_flow,
    phase_diagram_scan,
    rg_rhs,
)
from .gfp import (
    BogoliubovTransform,
    CorrelationCoefficients,
    ModeHamiltonian,
    bogoliubov_block,
    build_hq,
    correlation_length,
    correlation_matrix,
    dispersion,
    massive_correlator_F0,
    mean_spin_current,
    sigma_delta_tables,
    six_coefficients,
    solve_V_plus,
)
from .lattice import (
    LatticeParams,
    build_operators,
    kraus_pair,
    lindblad_identity_check,
    run_ensemble,
    sse_step,
)

__version__ = "0.1.0"
