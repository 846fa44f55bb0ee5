"""Selection-mutation population dynamics on finite strategy spaces.

A population is a nonnegative weight vector over finitely many
strategy atoms.  Individuals reproduce at a density-dependent rate B,
die at rate D, and offspring mutate between atoms according to a
row-stochastic kernel.  This package simulates those dynamics, locates
equilibria, and checks the qualitative long-time claims numerically:
total-mass permanence, persistence of invadable strategy sets,
Lyapunov-function monotonicity, and convergence to the optimal Dirac
state under pure selection or directed mutation.

The integrator's inner loop runs on a compiled extension when it is
built, with a bit-identical pure-Python fallback (see selmut._backend).
"""

from ._backend import BACKEND_NAME, HAVE_COMPILED, get_backend
from .analysis import (
    ConvergenceVerdict,
    LyapunovSeries,
    PermanenceReport,
    PersistenceCertificate,
    RatioDiagnostic,
    ass_verdict,
    choose_c,
    lyapunov_series,
    permanence_check,
    persistence_certificate,
    ratio_diagnostic,
)
from .dynamics import (
    ContinuationEntry,
    EquilibriumResult,
    IntegratorConfig,
    Trajectory,
    continuation,
    find_equilibrium,
    integrate,
    jacobian_at,
    vector_field,
    verify_integral_representation,
)
from .eig import eigvals, spectral_bound
from .errors import (
    CertificateUnavailableError,
    DomainError,
    EigenConvergenceError,
    InputError,
    InvalidModelError,
    NoFiniteRootError,
    PreconditionError,
    SearchFailureError,
    SelmutError,
    StiffnessError,
)
from .kernel import (
    DirectedReport,
    MutationKernel,
    OptimumPreservingReport,
    blend_toward,
    directed_kernel,
    gaussian_grid_kernel,
    identity_kernel,
    is_directed,
    is_irreducible_into,
    is_optimum_preserving,
    kernel_distance,
    uniform_kernel,
)
from .measure import (
    AtomicMeasure,
    StrategySpace,
    TestFunctionFamily,
    default_family,
    distance_to_dirac,
    mass,
    nearest_optimal_equilibrium,
    weak_norm,
)
from .vitals import (
    CarryingProfile,
    ESSReport,
    LogisticModel,
    RateModel,
    RickerModel,
    SuperiorityReport,
    TabulatedModel,
    build_profile,
    carrying_capacity,
    check_superiority,
    is_ess,
    net_growth,
    relative_fitness,
    reproduction_number,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BACKEND_NAME",
    "HAVE_COMPILED",
    "get_backend",
    # measure
    "StrategySpace",
    "AtomicMeasure",
    "TestFunctionFamily",
    "default_family",
    "mass",
    "weak_norm",
    "distance_to_dirac",
    "nearest_optimal_equilibrium",
    # vitals
    "RateModel",
    "RickerModel",
    "LogisticModel",
    "TabulatedModel",
    "CarryingProfile",
    "ESSReport",
    "SuperiorityReport",
    "reproduction_number",
    "carrying_capacity",
    "build_profile",
    "relative_fitness",
    "is_ess",
    "check_superiority",
    "net_growth",
    # kernel
    "MutationKernel",
    "identity_kernel",
    "uniform_kernel",
    "directed_kernel",
    "gaussian_grid_kernel",
    "blend_toward",
    "is_optimum_preserving",
    "is_directed",
    "is_irreducible_into",
    "kernel_distance",
    "OptimumPreservingReport",
    "DirectedReport",
    # dynamics
    "IntegratorConfig",
    "Trajectory",
    "EquilibriumResult",
    "ContinuationEntry",
    "vector_field",
    "integrate",
    "verify_integral_representation",
    "find_equilibrium",
    "jacobian_at",
    "continuation",
    # analysis
    "PermanenceReport",
    "PersistenceCertificate",
    "LyapunovSeries",
    "ConvergenceVerdict",
    "RatioDiagnostic",
    "permanence_check",
    "persistence_certificate",
    "lyapunov_series",
    "choose_c",
    "ass_verdict",
    "ratio_diagnostic",
    # eig
    "eigvals",
    "spectral_bound",
    # errors
    "SelmutError",
    "InputError",
    "InvalidModelError",
    "NoFiniteRootError",
    "CertificateUnavailableError",
    "PreconditionError",
    "StiffnessError",
    "SearchFailureError",
    "DomainError",
    "EigenConvergenceError",
]
