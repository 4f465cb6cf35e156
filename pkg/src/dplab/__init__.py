"""dplab: a numerical laboratory for double-phase variational integrals
at nearly linear growth.

Modules:
  integrand   - nearly-linear growth densities, ellipticity, conjugates
  fractal     - Cantor construction, competitors, dual field, parameters
  grid        - tensor grids, operators, seminorms, potentials
  solver      - regularized obstacle/Dirichlet convex minimization
  experiments - gap certificate, regularity sweep, blow-up diagnostic
  cli         - batch entry point
"""

from .integrand import (
    GrowthFunction,
    IntegrandSpec,
    eval_L,
    grad_L,
    hess_L,
    eval_H,
    eval_modular_G,
    eval_E_star,
    conjugate_H,
    V_sp,
)
from .fractal import (
    CantorParams,
    CantorApprox,
    CantorMeasureApprox,
    CounterexampleConfig,
    build_cantor,
    dist_to_cantor,
    cutoffs,
    competitor_u_star,
    competitor_u_tilde,
    fractal_coefficient_a,
    weight_b,
    dual_field_z,
    calibrate_pairing,
    select_parameters,
)
from .grid import (
    Grid,
    GridFunction,
    gradient,
    integrate,
    tau_h,
    tau2_h,
    gagliardo_seminorm,
    nikolskii_seminorm,
    wolff_potential,
    mollify_truncate,
)
from .solver import (
    ObstacleProblem,
    RegularizationSchedule,
    SolveReport,
    solve,
    regularized_family,
    energy,
)
from .experiments import (
    GapCertificate,
    SweepReport,
    lavrentiev_certificate,
    regularity_sweep,
    sobolev_blowup_diagnostic,
    approximation_convergence,
)

__version__ = "0.1.0"
