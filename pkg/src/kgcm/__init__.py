"""Time-varying treatment-effect estimation for sea-ice dynamics.

A knowledge-guided recurrent VAE (with latent-space distribution balancing
and an adjacency-masked causal decoder), the treatment-signal generator it
relies on, synthetic counterfactual benchmarks with known effects, recurrent
baselines, and a config-driven experiment CLI.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, KgcmError, TrainingDiverged
from .ingest import (DEFAULT_SCHEMA, StandardizationStats, TimeSeriesFrame,
                     chronological_split, load_series, spatial_average,
                     standardize, unstandardize)
from .model import KgcmVae, ModelConfig, mask_from_logits
from .objectives import (EvalReport, LossWeights, MMDConfig, grad_check,
                         kl_loss, median_bandwidth, mmd2, mse_loss, pehe,
                         rbf_kernel, rmse, total_loss)
from .physics import (GeostrophicParams, HydrostaticParams,
                      geostrophic_velocity, hydrostatic_thickness)
from .synthetic import SynthConfig, SynthOutput, gen_counterfactual, ground_truth_ite
from .treatment import (ModulatedSeries, TreatmentConfig, build_treatment,
                        lag_shift, modulate, modulation_factor, smooth)
from .windowing import Batch, WindowConfig, WindowedSample, batch, build_windows

__all__ = [
    "ConfigError", "DataError", "KgcmError", "TrainingDiverged",
    "DEFAULT_SCHEMA", "StandardizationStats", "TimeSeriesFrame",
    "chronological_split", "load_series", "spatial_average", "standardize",
    "unstandardize",
    "KgcmVae", "ModelConfig", "mask_from_logits",
    "EvalReport", "LossWeights", "MMDConfig", "grad_check", "kl_loss",
    "median_bandwidth", "mmd2", "mse_loss", "pehe", "rbf_kernel", "rmse",
    "total_loss",
    "GeostrophicParams", "HydrostaticParams", "geostrophic_velocity",
    "hydrostatic_thickness",
    "SynthConfig", "SynthOutput", "gen_counterfactual", "ground_truth_ite",
    "ModulatedSeries", "TreatmentConfig", "build_treatment", "lag_shift",
    "modulate", "modulation_factor", "smooth",
    "Batch", "WindowConfig", "WindowedSample", "batch", "build_windows",
    "__version__",
]
