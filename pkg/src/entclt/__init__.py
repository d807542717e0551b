"""Numerical checks for entropy and Fisher-information CLTs under strong mixing.

The library works with Gaussian-smoothed finitely supported laws, for which
densities, scores and every functional built from them can be evaluated to
quadrature accuracy.
"""

from .config import ExperimentConfig, load_config, parse_config
from .errors import CapacityError, DomainError, NumericError
from .experiments import run_convergence, run_inequality_suite
from .functionals import (delta_functional, deltadom_lowerbound_check,
                          fishdecomp_check, fisher, fisher_standardized,
                          m_function, relent_debruijn, relent_direct,
                          score_pointwise_bound_check, scorel2_window_check,
                          stein_residual_2d, theta_seminorm)
from .mixing import (FiniteJointLaw, MixingReport, alpha_estimate_rectangles,
                     alpha_exact, alpha_smoothed_pair, covariance_bound_check,
                     delta_n_coefficient, tv_window_check)
from .processes import (ProcessSpec, build_block_pair, build_smoothed_vn,
                        exact_alpha_lag, long_run_variance, simulate_windows)
from .reports import ConvergenceReport, InequalityReport, emit_report
from .smoothed import (AtomCloud, GridSpec, SmoothedPair, SmoothedScalar,
                       add_noise, density, pair_density, pair_partial_score,
                       rescale, score, sum_score)

__version__ = "0.1.0"
