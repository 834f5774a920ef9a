"""Neural-ODE stability toolkit.

Explicit Runge-Kutta solvers with their stability regions, eigenvalue
rejection sampling, stability-informed network initialization, pole
analysis of learned models, and reproducible teacher-student benchmarks.
"""

from .errors import (
    ConvergenceError,
    DimensionError,
    DivergenceError,
    EmptySignalError,
    InfeasibleRegionError,
    ModelFormatError,
    StiffnessError,
)
from .linalg import (
    eigenvalues,
    hausdorff_distance,
    principal_nth_root,
    qr_decompose,
    sample_haar_orthogonal,
)
from .network import (
    Activation,
    ELU,
    FeedforwardNet,
    IDENTITY,
    RELU,
    TANH,
    forward,
    jacobian_state,
    load_model,
    save_model,
    vjp,
)
from .solvers import (
    EULER,
    MIDPOINT,
    RK3,
    RK4,
    TABLEAUS,
    ButcherTableau,
    InputSignal,
    Trajectory,
    integrate_dopri,
    integrate_fixed,
    interp_input,
    rk_step,
    tableau_for_order,
)
from .stability import (
    EigenSet,
    Pole,
    RegionGrid,
    SamplerConfig,
    in_region,
    model_poles,
    region_grid,
    sample_stable_eigenvalues,
    sample_unstable_eigenvalues,
    stability_poly,
)
from .initializers import (
    SIIPlan,
    build_lambda,
    default_initialize,
    init_report,
    linearized_product,
    make_sii_plan,
    sii_initialize,
    sii_initialize_from_eigenset,
    verify_linearization,
)

__version__ = "0.1.0"
