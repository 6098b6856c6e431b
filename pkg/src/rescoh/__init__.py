"""Residual coherence and integrated spectrum for selecting lag-product inputs."""

from .decomposition import (
    SpectralSystem,
    cramer_coefficients,
    a_coefficient,
    component_spectrum,
    decompose,
    explained_spectrum_direct,
    integrated_spectrum,
    lagged_coherence,
    residual_coherence,
)
from .estimators import InteractionSelector, StepwiseOLS
from .lagfamily import CandidateFamily, ScanResult, StopRule, build_candidate, greedy_select, scan, scan_criteria
from .regression import build_lag_design, ols_fit, stepwise_aic
from .spectral import CrossSpectrum, FrequencyGrid, LagWindow, coherence, cross_covariance, estimate_cross_spectrum
from .timeseries import Ar1Spec, Series, center, difference, simulate_ar1, simulate_system, synthesize_output

__version__ = "0.1.0"
