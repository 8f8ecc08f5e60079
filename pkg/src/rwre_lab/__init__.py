"""Numerical laboratory for ballistic one-dimensional walks in random environments."""

__version__ = "0.1.0"

from .env_model import (BallisticSummary, Environment, EnvironmentDistribution,
                        ballistic_summary, log_mgf_rho, make_two_point,
                        sample_environment, standard_two_point)
from .errors import (BracketError, ConfigError, ContextError, CoverageError,
                     EllipticityError, NonBallisticError, RwreError, TruncationError)
from .potential import (EpsPartition, PotentialProfile, build_profile, delta_eps,
                        delta_eps_sandwich, eps_partition, hit_prob_ratio,
                        local_log_s, s_minus_inf, shifted_profile, w_bound,
                        w_value, xi_bar, xi_n)
from .conditioned import (ConditionedEnvironment, Kind, hat_l_transform,
                          hat_transform, shat_shift_check)
from .walk import (HitSite, HittingRecord, Mode, Steps, Trajectory,
                   backtrack_event, er_statistic, local_time_counts,
                   race_probability, simulate_until)
from .hitting import (DpKernel, IHatResult, MgfTable, PhiResult, hit_prob_dp,
                      hit_prob_enumerate, i_hat, lambda_bracket,
                      passage_tail, passage_time_dist, phi_site,
                      phi_site_truncated)
from .rates import (FiniteLaw, IFResult, IStarResult, ProductMeasure, RateCurve,
                    RatePoint, SRatioResult, XStarResult, a_alpha, cramer_rate,
                    i_f, i_m, i_star, if_floor_check, kl_per_site, kl_weights,
                    log_rho_law, min_ratio_s, x_star, RESTRICTED_FAMILY)
from .chi import (ChiEstimate, ChiSlopeResult, SlopeUndefinedError, chi_exact_small,
                  chi_mc, chi_slope)

__all__ = [name for name in dir() if not name.startswith("_")]
