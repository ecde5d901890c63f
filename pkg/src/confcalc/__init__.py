"""Conformable fractional calculus: symbolic derivatives, singular-weight
quadrature, integral identities and weighted Hardy-type inequality checks."""

from .conformable import (
    ExponentVec, NumericDiffConfig, anisotropic_op, chain_rule_residual, compose_orders,
    conf_deriv, conf_deriv_numeric, conf_gradient, conf_laplacian, mixed_partials_residual,
)
from .expr import DomainError, Expr, ExprSyntaxError, diff, evaluate, parse, to_string
from .hardy import (
    ExpWeightConfig, InequalityReport, PowerWeightConfig, SubsolutionError, WeightSystem,
    bump_suite, corollary_38_bound, corollary_39_bound, exp_weight_instance, hardy_general,
    hpw_anisotropic_check, hpw_cauchy_schwarz, hpw_check, positive_suite,
    power_weight_instance, remark_37_bound, verify_subsolution,
)
from .identities import (
    PiconePair, gauss_mean_value_residual, green_first_residual, green_second_residual,
    picone_L, picone_R,
)
from .optimize import (
    OptimizerConfig, QuotientProblem, estimate_best_constant, nelder_mead, quotient,
)
from .quadrature import (
    BoxDomain, QuadratureSpec, alpha_flux, alpha_integral_1d, alpha_integral_nd,
    divergence_residual, fundamental_theorem_residuals, integration_by_parts_residual,
)

__version__ = "0.1.0"
