"""Bayesian double-logistic phenology fitting for bounded vegetation indices.

The package fits a seven-parameter double-logistic seasonal curve to
vegetation-index time series by random-walk Metropolis sampling under a
Normal, truncated-Normal, or Beta (mean-precision) observation model, and
propagates the posterior to derived quantities: fitted and predictive curve
bands, season length, curve maximum, crossover day, and area under the
curve. The same machinery runs per pixel over raster bricks with
deterministic, schedule-independent seeding, so parallel runs are
bit-reproducible.
"""

from .curve import CurveParams, IndexBounds, autumn, crossover, curve_value, spring
from .likelihood import (LikelihoodKind, NoiseParam, ObservationSeries,
                         log_density, predictive_draw, series_log_likelihood,
                         simulate_series)
from .prior import (ParamVector, PriorSpec, default_priors, in_support,
                    log_prior, override_priors)
from .sampler import (Chain, ChainConfig, TuningSpec, log_posterior,
                      read_chain_csv, run_chain, subsample_indices,
                      write_chain_csv)
from .posterior import (PosteriorSummary, QuadratureConfig, auc_samples,
                        crossover_samples, curve_max_samples, fitted_samples,
                        functional_samples, predictive_samples,
                        season_length_samples, summarize, write_summary_csv)
from .brick import (Brick, BrickFitResult, fit_brick, ingest_long_csv,
                    pixel_seed, read_brick, summarize_brick, write_brick)

__version__ = "0.1.0"

__all__ = [
    "CurveParams", "IndexBounds", "spring", "autumn", "crossover",
    "curve_value",
    "NoiseParam", "LikelihoodKind", "ObservationSeries", "log_density",
    "series_log_likelihood", "predictive_draw", "simulate_series",
    "PriorSpec", "ParamVector", "default_priors", "in_support", "log_prior",
    "override_priors",
    "TuningSpec", "ChainConfig", "Chain", "log_posterior", "run_chain",
    "subsample_indices", "write_chain_csv", "read_chain_csv",
    "PosteriorSummary", "QuadratureConfig", "summarize", "fitted_samples",
    "predictive_samples", "season_length_samples", "curve_max_samples",
    "crossover_samples", "auc_samples", "functional_samples",
    "write_summary_csv",
    "Brick", "BrickFitResult", "pixel_seed", "write_brick", "read_brick",
    "ingest_long_csv", "fit_brick", "summarize_brick",
    "__version__",
]
