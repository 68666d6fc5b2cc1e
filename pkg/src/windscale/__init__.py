"""Scaling analysis of nonstationary time series.

Building blocks: CSV ingestion and resampling, log-frequency power spectral
density with power-law fits, maximum-likelihood distribution ranking by
Kullback-Leibler divergence, singular spectrum analysis for trend removal,
magnitude/sign decomposition of increments, detrended fluctuation analysis
with two-timescale exponents, and amplitude-adjusted Fourier surrogates; plus
a batch pipeline tying them together (see ``windscale.cli``).
"""

__version__ = "0.1.0"

from .series import (
    TimeSeries,
    IncrementSeries,
    MagSignPair,
    CorrelationMatrix,
    load_csv,
    resample_mean,
    increments,
    mag_sign,
    pearson_matrix,
)
from .spectral import PsdEstimate, SpectralFit, lpsd, fit_spectral_exponent
from .distfit import (
    DistFit,
    EmpiricalDensity,
    empirical_density,
    fit_distribution,
    kl_divergence,
    rank_distributions,
)
from .ssa import (
    SsaConfig,
    SsaDecomposition,
    TrendSplit,
    default_window,
    toeplitz_correlation,
    decompose,
    split_trend,
)
from .dfa import (
    FluctuationFunction,
    ScalingExponent,
    dfa_profile,
    dfa,
    scaling_exponent,
    default_box_grid,
)
from .surrogate import SurrogateConfig, SurrogateReport, make_surrogate, ensemble_test
from .synth import GeneratorSpec, generate
from .pipeline import PipelineConfig, PipelineReport, run_pipeline, load_config

__all__ = [
    "TimeSeries", "IncrementSeries", "MagSignPair", "CorrelationMatrix",
    "load_csv", "resample_mean", "increments", "mag_sign", "pearson_matrix",
    "PsdEstimate", "SpectralFit", "lpsd", "fit_spectral_exponent",
    "DistFit", "EmpiricalDensity", "empirical_density", "fit_distribution",
    "kl_divergence", "rank_distributions",
    "SsaConfig", "SsaDecomposition", "TrendSplit", "default_window",
    "toeplitz_correlation", "decompose", "split_trend",
    "FluctuationFunction", "ScalingExponent", "dfa_profile", "dfa",
    "scaling_exponent", "default_box_grid",
    "SurrogateConfig", "SurrogateReport", "make_surrogate", "ensemble_test",
    "GeneratorSpec", "generate",
    "PipelineConfig", "PipelineReport", "run_pipeline", "load_config",
]
