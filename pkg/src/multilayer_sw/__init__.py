"""N-layer shallow water engine with Gent-McWilliams diffusivity, plus the
operator algebra, norms and studies used to verify its 1/N^2 convergence
toward the continuously stratified hydrostatic system."""

from .harness import (
    DispersionConfig,
    RateFit,
    StudyConfig,
    StudyReport,
    consistency_study,
    convergence_study,
    dispersion_study,
    fit_rate,
    run_identity_suite,
)
from .layers import DensityGrid, DimensionError, apply_gamma_fast, gamma_dense
from .solver import (
    BlowUpError,
    CavitationError,
    SolverError,
    SolverParams,
    SolverState,
    cfl_dt,
    energy,
    rhs,
    simulate,
    step,
)
from .spectral import SpatialGrid
from .stratification import ContinuousProfile, consistency_remainder, make_profile, project_PN, project_PN_bar

__version__ = "0.1.0"
