"""polylab: real roots of random polynomials with polynomially growing
coefficients -- ensembles, certified counting, Kac-Rice quadrature, the
sign-change/truncation estimator chain, Green's-identity Monte Carlo zero
counting, and the statistics harness around them."""

from .ensemble import (AtomSpec, CoefficientScheme, SampledPolynomial,
                       derivative_eval, evaluate, make_atom, make_scheme,
                       negate_argument, reverse_polynomial, sample_polynomial)
from .estimators import (BlockPlan, DyadicGrid, TruncationParams,
                         block_plan, dyadic_grid, independence_check,
                         sign_change_count, truncated_eval,
                         truncated_sign_chain, truncation_window)
from .kacrice import (MomentSums, QuadConfig, c_k_rho, correlation_r,
                      delta_cross, envelope_variance_bound, expected_roots,
                      f4_term, hyperbolic_variance_closed, kacrice_integrand,
                      moment_sums, one_minus_r_squared, variance_V)
from .mclog import (BumpSpec, MCConfig, bump_laplacian, bump_value,
                    green_integral, make_mc_config, mc_zero_estimate,
                    smoothed_count)
from .roots_exact import (CertifiedCount, CoreRegion, IntervalCounter,
                          complex_roots, count_all_real_roots,
                          count_core_region, count_real_roots,
                          count_roots_in_disk, jensen_bound, sturm_count)
from .stats import (ChainConfig, ExperimentConfig, ExperimentReport,
                    EstimatorSpec, RegionSpec, SchemeFamily,
                    estimator_chain_report, ks_statistic, maslova_constant,
                    run_clt_experiment, tail_moment, universality_compare,
                    variance_slope)

__version__ = "0.1.0"
