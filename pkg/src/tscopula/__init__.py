"""Copulas of innovations in nonparametric AR-ARCH time series.

Remove the conditional mean and volatility of two series by local
polynomial smoothing, estimate the copula of the standardized residuals
(empirically and within parametric families) and test goodness of fit by
parametric bootstrap.
"""

from .copulas import (FAMILIES, Clayton, Copula, Frank, Gaussian, Gumbel, Independence,
                      StudentT, family_class, kendall_tau_inverse, make_copula)
from .data import FxSeries, TimeSeriesSample, ingest_cnb, ingest_csv, write_csv
from .errors import *  # noqa: F401,F403
from .estimation import (EstimateResult, fit, fit_ik, fit_md, fit_mpl, ik_std_error,
                         sample_kendall_tau, sandwich_variance)
from .gof import GofResult, cvm_statistic, independence_test, parametric_bootstrap_test
from .residual_copula import (EmpiricalCopula, ResidualCopulaData, empirical_copula,
                              estimate_residuals, residuals, sup_distance)
from .smoothing import (WeightRegion, cv_bandwidth, fit_mean_variance, kde, local_poly_eval,
                        local_poly_fit, weight_region)

__version__ = "0.1.0"
