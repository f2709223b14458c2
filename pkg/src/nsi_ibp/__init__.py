"""Singular and nearly singular 1-D integrals by integration by parts.

An integral of f = p/q is rewritten with a weight q~ whose h~ = int 1/q~ is known, leaving
a boundary term plus a residual integral that composite Gauss-Legendre handles well.
"""
from .errors import (ConfigurationError, DivergenceError, DomainError, EvaluationError, InvalidArgumentError,
                     LogDomainError, NsiIbpError, RegimeError, SingularityLeakError, UnresolvableSingularityError,
                     UnsolvableRelationError, UnsupportedWeightError)
from .quadrature import (DEFAULT_RULE, DerivativeSpec, Interval, QuadratureRule, differentiate, gauss_legendre_rule,
                         integrate, oracle_integrate)
from .weights import (BoundaryLimit, WeightFamily, boundary_limit, boundary_term, estimate_gamma,
                      h_beta_recursive, h_tilde)
from .engine import (ErrorEstimate, RecipeOptions, SingularIntegrand, TransformResult, beta_relation_constants,
                     direct_method_beta_relation, direct_method_hx_equals_x, direct_method_ode,
                     estimate_relative_error, ibp_approximate, ibp_conventional, ibp_general_unknown_q,
                     ibp_known_q_correction, ibp_simple_power, integrating_factor, ode_condition_residual,
                     recipe_solve, recipe_solve_split, split_at_singularities, weight_mismatch)
from .families import (FamilyCase, analytic_reference, eval_hybrid, eval_log_power, eval_near_singular_minus,
                       eval_near_singular_plus, eval_power_law, family_integrand, hybrid_transform,
                       near_singular_transform, power_law_transform)
from .em import (KernelCase, ObservationPoint, RwgPair, electrostatic_integral, green_kernel_inner, kernel_case,
                 rwg_convolution, rwg_current, rwg_oracle)
from .bench import (AccuracyRecord, SweepConfig, compare_against_reference, emit_report, load_report,
                    run_suite)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
