"""Traveling fronts of (-Delta)^s phi + mu phi' = F(phi) on the line."""

from .errors import (BracketError, ContinuationError, ContractError, DomainError, FrontError,
                     InvariantViolation, IterationError, OrderingError, SolverError, WindowError)
from .model import (CombustionCutoff, ConstantTail, FrontProfile, GeneralizedKPP, GridSpec,
                    PowerLawTail, SolveParams, ZeroNonlinearity, critical_order,
                    eval_nonlinearity, truncated_grid, validate_hypotheses)
from .nonlocal_operator import (assemble_operator, frac_laplacian_apply, mmatrix_check,
                                symbol_constant)
from .bvp_solver import monotone_iterate, normalize_theta, solve_linear
from .speed_finder import (combustion_speed, epsilon_continuation_front, estimate_mu_star,
                           nu_bound)
from .diagnostics import (barrier_check, decay_fit, diagnostics_report,
                          gamma_supersolution_residual, l2_tail_norms, speed_identity,
                          tail_limit, uniqueness_sliding)

__version__ = "0.1.0"
