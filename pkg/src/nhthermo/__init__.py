"""Information thermodynamics of non-Hermitian quantum systems."""

__version__ = "0.1.0"

from .operators import (  # noqa: F401
    DensityMatrix,
    EigenSystem,
    HermitianOperator,
    eig_hermitian,
    expectation,
    frechet_dlog,
    gibbs_state,
    log_partition,
    log_psd,
    relative_entropy,
    trace_distance,
    unitary_log_derivative,
    von_neumann_entropy,
)
from .dynamics import (  # noqa: F401
    BathSpec,
    LinearRamp,
    NonHermitianSystem,
    PiecewiseLinearSchedule,
    StaticSchedule,
    Trajectory,
    balanced_frame,
    build_generator,
    davies_dissipator,
    evolve,
    nh_generator,
    site_projectors,
    steady_state,
    thermal_state_estimate,
)
from . import engine, hatano_nelson, thermo  # noqa: F401
