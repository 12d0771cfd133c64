"""clcons: a numerical lab for companion conservation laws.

Grids and fields (:mod:`clcons.grid`), systems with companion pairs
(:mod:`clcons.systems`), discrete mollification (:mod:`clcons.mollify`),
regularity and residual diagnostics (:mod:`clcons.analysis`), test-field
generators and a finite-volume solver (:mod:`clcons.generators`), and a
batch command line (:mod:`clcons.cli`).
"""

__version__ = "0.1.0"

from .grid import (  # noqa: E402
    Field,
    Grid,
    InteriorRegion,
    TestFunction,
    field_norm_p,
    make_grid,
    make_region,
    read_clf,
    read_csv,
    sample_function,
    shift_field,
    write_clf,
    write_csv,
)
from .systems import (  # noqa: E402
    Box,
    DomainError,
    SystemSpec,
    burgers_system,
    compatibility_residual,
    euler_system,
    finite_difference_check,
    flux_gradient_holder_estimate,
    growth_check,
    linear_system,
    make_system,
    psystem_elasticity,
    random_states,
    system_from_config,
    weak_residual,
)
from .mollify import (  # noqa: E402
    Kernel,
    convolve_taps,
    dyadic_epsilons,
    make_kernel,
    mollified_derivative,
    mollify,
    snap_epsilon,
)
from .analysis import (  # noqa: E402
    DissipationField,
    LogLogFit,
    ScalingReport,
    besov_seminorm,
    commutator_scaling,
    companion_residual_mollified,
    companion_residual_scaling,
    companion_weak_residual,
    dissipation_density,
    fit_loglog_exponent,
    flux_commutator,
    gradient_scaling,
    integration_by_parts_bound,
    mollification_error_scaling,
    quadrature_tolerance,
    vmo_modulus,
    vmo_scaling,
)
from .generators import (  # noqa: E402
    GeneratorSpec,
    SolverAbort,
    burgers_riemann,
    burgers_riemann_profile,
    burgers_smooth,
    cell_grid,
    fv_solve,
    generate,
    riemann_initial,
    smooth_modes_field,
    step_field,
    weierstrass_field,
)
