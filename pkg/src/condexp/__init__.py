"""Conditional expectation on finite probability spaces.

Three independent solvers (atom averages, orthogonal projection, descent on
the energy ``J(Y) = 1/2 E[Y^2] - E[XY]``) plus machine checks of the
identities that characterize E(X|G).
"""

from .density import approximation_trace, l1_extension_trace, staircase, truncate
from .errors import (
    CondExpError,
    ConvergenceError,
    MeasurabilityError,
    SizeMismatchError,
    ValidationError,
)
from .functional import (
    EnergyProblem,
    check_derivatives,
    directional_quotient,
    j_eval,
    j_gateaux,
    j_second,
    minimum_gap,
    t_apply,
)
from .prob_space import (
    Event,
    ProbabilitySpace,
    RandomVariable,
    expectation,
    inner_product,
    integrate_over,
    new_space,
    norm1,
    norm2,
)
from .sigma_algebra import SigmaAlgebra, discrete, generate, indicator, is_measurable, refines, trivial
from .solvers import (
    CondExpResult,
    GradientConfig,
    VerificationReport,
    dirichlet_check,
    solve,
    solve_gradient,
    solve_oracle,
    solve_projection,
    tower_check,
    verify_defining_property,
    verify_product_identity,
)

__version__ = "0.1.0"
