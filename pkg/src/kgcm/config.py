"""Flat dotted-key configuration with a validated schema.

Config files are plain text, one ``key = value`` per line, ``#`` comments.
CLI ``--set key=value`` flags override file values.  Every key is validated
against the schema below before any work starts; unknown keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError
from .model import ModelConfig
from .objectives import LossWeights, MMDConfig
from .physics import GeostrophicParams, HydrostaticParams
from .synthetic import SynthConfig
from .training import TrainerConfig
from .treatment import TreatmentConfig
from .windowing import WindowConfig

MODEL_KINDS = ("kgcm_vae", "r_tarnet", "cf_rnn", "r_crn")


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_or_median(s: str):
    s = s.strip()
    if s == "median":
        return "median"
    return float(s)


def _parse_int_list(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _parse_float_list(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any
    help: str


SCHEMA: dict[str, _Key] = {
    # data
    "data.csv": _Key(str, "", "input CSV with header date,sit,ssh,u,v,vtot"),
    "data.grid_dir": _Key(str, "", "optional dir of per-variable gridded files (date,lat,lon,value)"),
    "data.lat_min": _Key(float, 60.0, "latitude band lower bound for spatial averaging"),
    "data.lat_max": _Key(float, 90.0, "latitude band upper bound for spatial averaging"),
    "data.area_weighted": _Key(_parse_bool, False, "cosine-latitude weighting for spatial means"),
    "data.fractions": _Key(_parse_float_list, (0.7, 0.15, 0.15), "chronological train/val/test fractions"),
    # treatment signal
    "treatment.smooth_window": _Key(int, 7, "moving-average width in days"),
    "treatment.a": _Key(float, 10.0, "sigmoid steepness"),
    "treatment.v0": _Key(_parse_float_or_median, "median", "transition center or 'median' (train split)"),
    "treatment.beta_mod": _Key(float, 0.1, "modulation strength"),
    "treatment.velocity_scale": _Key(float, 1.0, "scenario knob: scales smoothed velocity"),
    # physical constants for the diagnostics
    "knowledge.rho_w": _Key(float, 1024.0, "seawater density kg/m^3"),
    "knowledge.rho_i": _Key(float, 917.0, "sea-ice density kg/m^3"),
    "knowledge.rho_s": _Key(float, 320.0, "snow density kg/m^3"),
    "knowledge.g": _Key(float, 9.81, "gravity m/s^2"),
    "knowledge.f": _Key(float, 1.4e-4, "Coriolis parameter 1/s"),
    # synthetic counterfactuals
    "synth.alpha": _Key(float, 2.0, "tanh steepness"),
    "synth.beta_eff": _Key(float, 0.5, "effect magnitude"),
    "synth.noise_sd": _Key(float, 0.05, "noise standard deviation"),
    "synth.seed": _Key(int, 0, "noise generator seed"),
    # windowing
    "window.lookback": _Key(int, 14, "history length L"),
    "window.lead": _Key(int, 1, "prediction lead n"),
    "window.lag": _Key(int, 1, "treatment lag"),
    "window.outcome": _Key(str, "sit", "outcome feature"),
    "window.treatment": _Key(str, "ssh", "treatment feature"),
    # model
    "model.hidden_size": _Key(int, 64, "encoder hidden size per direction"),
    "model.latent_dim": _Key(int, 32, "latent dimension"),
    "model.decoder_hidden": _Key(int, 16, "decoder per-unit hidden size"),
    "model.mask_mode": _Key(str, "soft", "'soft' or 'hard' adjacency mask"),
    "model.mask_threshold": _Key(float, 0.5, "hard-mask threshold (ties active)"),
    "model.mask_l1": _Key(float, 0.0, "optional mask sparsity penalty (extension, off by default)"),
    "model.adj_enabled": _Key(_parse_bool, True, "False replaces the mask with all-ones"),
    # losses
    "loss.alpha_kl": _Key(float, 0.01, "KL weight"),
    "loss.beta_mmd": _Key(float, 1.0, "latent-balance MMD weight"),
    "loss.mmd_bandwidth": _Key(_parse_float_or_median, "median", "RBF bandwidth or 'median'"),
    # trainer
    "train.model": _Key(str, "kgcm_vae", "model to train: kgcm_vae | r_tarnet | cf_rnn | r_crn"),
    "train.lr": _Key(float, 1e-3, "learning rate"),
    "train.batch_size": _Key(int, 64, "batch size"),
    "train.max_epochs": _Key(int, 200, "epoch cap"),
    "train.patience": _Key(int, 40, "early-stop patience on smoothed validation factual MSE"),
    "train.clip_norm": _Key(float, 5.0, "gradient-norm clip"),
    "train.seed": _Key(int, 0, "parameter/noise seed"),
    "train.shuffle_seed": _Key(int, 0, "batch shuffling seed"),
    "train.threads": _Key(int, 1, "torch thread count (1 keeps runs bit-identical)"),
    # baselines
    "baseline.trunk_hidden": _Key(int, 64, "baseline trunk hidden size"),
    "baseline.head_hidden": _Key(int, 32, "baseline head hidden size"),
    "baseline.balance_weight": _Key(float, 1.0, "r_crn representation-balance weight"),
    # evaluation & protocols
    "eval.split": _Key(str, "test", "split to evaluate: train | val | test"),
    "eval.mmd_bandwidth": _Key(_parse_float_or_median, 1.0,
                               "kernel width for the reported latent balance; a fixed"
                               " value keeps the number comparable across models"),
    "protocol.seeds": _Key(_parse_int_list, (0, 1, 2), "seed list for protocol tables"),
    "protocol.lags": _Key(_parse_int_list, (3, 6, 9), "treatment lags for the sweep"),
    # plotting
    "plot.runs": _Key(str, "", "comma list of scenario=run_dir pairs"),
    # demo data generation
    "demo.days": _Key(int, 2000, "length of generated demo series"),
    "demo.seed": _Key(int, 0, "demo data seed"),
}


class ExperimentConfig:
    """Validated view over the flat key/value configuration."""

    def __init__(self, values: dict[str, Any] | None = None):
        self._values = dict(values or {})
        for key in self._values:
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key '{key}'")

    def __getitem__(self, key: str) -> Any:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key '{key}'")
        return self._values.get(key, SCHEMA[key].default)

    def with_overrides(self, **values_by_key) -> "ExperimentConfig":
        merged = dict(self._values)
        merged.update(values_by_key)
        return ExperimentConfig(merged)

    def override(self, key: str, value: Any) -> "ExperimentConfig":
        return self.with_overrides(**{key: value})

    def to_dict(self) -> dict[str, Any]:
        """Full resolved configuration (defaults included), key-sorted."""
        return {k: self[k] for k in sorted(SCHEMA)}

    # ---- typed sub-configs -------------------------------------------------

    def treatment_config(self) -> TreatmentConfig:
        return TreatmentConfig(
            smooth_window=self["treatment.smooth_window"],
            a=self["treatment.a"],
            v0=self["treatment.v0"],
            beta_mod=self["treatment.beta_mod"],
            velocity_scale=self["treatment.velocity_scale"],
        )

    def synth_config(self, seed: int | None = None) -> SynthConfig:
        return SynthConfig(alpha=self["synth.alpha"], beta_eff=self["synth.beta_eff"],
                           noise_sd=self["synth.noise_sd"],
                           seed=self["synth.seed"] if seed is None else seed)

    def window_config(self) -> WindowConfig:
        return WindowConfig(lookback=self["window.lookback"], lead=self["window.lead"],
                            lag=self["window.lag"],
                            outcome_feature=self["window.outcome"],
                            treatment_feature=self["window.treatment"])

    def model_config(self, feature_names: tuple[str, ...], seed: int | None = None) -> ModelConfig:
        return ModelConfig(
            feature_names=feature_names,
            outcome_feature=self["window.outcome"],
            hidden_size=self["model.hidden_size"],
            latent_dim=self["model.latent_dim"],
            decoder_hidden=self["model.decoder_hidden"],
            mask_mode=self["model.mask_mode"],
            mask_threshold=self["model.mask_threshold"],
            mask_l1=self["model.mask_l1"],
            adj_enabled=self["model.adj_enabled"],
            seed=self["train.seed"] if seed is None else seed,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(alpha_kl=self["loss.alpha_kl"], beta_mmd=self["loss.beta_mmd"])

    def hydrostatic_params(self, h_ice, h_ssh, h_s=0.0) -> HydrostaticParams:
        """Hydrostatic inputs with the configured densities."""
        return HydrostaticParams(h_ice=h_ice, h_ssh=h_ssh, h_s=h_s,
                                 rho_w=self["knowledge.rho_w"],
                                 rho_i=self["knowledge.rho_i"],
                                 rho_s=self["knowledge.rho_s"])

    def geostrophic_params(self, deta_dx, deta_dy) -> GeostrophicParams:
        """Geostrophic inputs with the configured gravity and Coriolis values."""
        return GeostrophicParams(deta_dx=deta_dx, deta_dy=deta_dy,
                                 g=self["knowledge.g"], f=self["knowledge.f"])

    def mmd_config(self) -> MMDConfig:
        return MMDConfig(bandwidth=self["loss.mmd_bandwidth"])

    def eval_mmd_config(self) -> MMDConfig:
        return MMDConfig(bandwidth=self["eval.mmd_bandwidth"])

    def trainer_config(self, seed: int | None = None) -> TrainerConfig:
        return TrainerConfig(
            lr=self["train.lr"], batch_size=self["train.batch_size"],
            max_epochs=self["train.max_epochs"], patience=self["train.patience"],
            clip_norm=self["train.clip_norm"],
            seed=self["train.seed"] if seed is None else seed,
            shuffle_seed=self["train.shuffle_seed"] if seed is None else seed,
            threads=self["train.threads"],
        )


def parse_value(key: str, raw: str) -> Any:
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key '{key}'")
    try:
        return SCHEMA[key].parse(raw.strip())
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid value for '{key}': {raw!r} ({exc})") from None


def load_config(path: str | Path | None = None,
                overrides: list[str] | None = None) -> ExperimentConfig:
    """Load a config file (optional) and apply ``key=value`` overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = stripped.split("=", 1)
            values[key.strip()] = parse_value(key.strip(), raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = parse_value(key.strip(), raw)
    cfg = ExperimentConfig(values)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg["train.model"] not in MODEL_KINDS:
        raise ConfigError(f"train.model must be one of {MODEL_KINDS}")
    if cfg["eval.split"] not in ("train", "val", "test"):
        raise ConfigError("eval.split must be train, val, or test")
    if len(cfg["data.fractions"]) != 3:
        raise ConfigError("data.fractions needs exactly three values")
    if cfg["model.mask_mode"] not in ("soft", "hard"):
        raise ConfigError("model.mask_mode must be 'soft' or 'hard'")
    for key in ("treatment.smooth_window", "window.lookback", "window.lead",
                "window.lag", "train.batch_size", "train.max_epochs",
                "demo.days"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    if cfg["treatment.a"] <= 0 or cfg["synth.alpha"] <= 0:
        raise ConfigError("sigmoid/tanh steepness parameters must be > 0")
    if cfg["treatment.beta_mod"] < 0 or cfg["synth.noise_sd"] < 0:
        raise ConfigError("treatment.beta_mod and synth.noise_sd must be >= 0")
    if cfg["loss.alpha_kl"] < 0 or cfg["loss.beta_mmd"] < 0:
        raise ConfigError("loss weights must be >= 0")
    if not cfg["protocol.seeds"]:
        raise ConfigError("protocol.seeds must not be empty")
