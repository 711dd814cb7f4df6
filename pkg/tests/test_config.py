from __future__ import annotations

import pytest

from kgcm.config import SCHEMA, ExperimentConfig, load_config, parse_value
from kgcm.errors import ConfigError


def test_defaults_cover_every_key():
    cfg = load_config()
    resolved = cfg.to_dict()
    assert set(resolved) == set(SCHEMA)
    assert resolved["window.lookback"] == 14
    assert resolved["treatment.v0"] == "median"
    assert resolved["protocol.seeds"] == (0, 1, 2)
    assert resolved["protocol.lags"] == (3, 6, 9)


def test_file_parsing_with_comments(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# experiment config\n"
        "window.lookback = 7\n"
        "treatment.v0 = 0.25   # explicit center\n"
        "\n"
        "protocol.seeds = 4,5\n"
        "model.adj_enabled = false\n"
    )
    cfg = load_config(path)
    assert cfg["window.lookback"] == 7
    assert cfg["treatment.v0"] == 0.25
    assert cfg["protocol.seeds"] == (4, 5)
    assert cfg["model.adj_enabled"] is False


def test_cli_overrides_beat_file_values(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("window.lookback = 7\n")
    cfg = load_config(path, overrides=["window.lookback=21", "synth.seed=3"])
    assert cfg["window.lookback"] == 21
    assert cfg["synth.seed"] == 3


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("window.lookbck = 7\n")
    with pytest.raises(ConfigError, match="unknown config key 'window.lookbck'"):
        load_config(path)
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config(overrides=["nope=1"])


def test_bad_value_reports_key():
    with pytest.raises(ConfigError, match="invalid value for 'window.lookback'"):
        parse_value("window.lookback", "seven")
    with pytest.raises(ConfigError, match="treatment.v0"):
        parse_value("treatment.v0", "midean")


def test_malformed_lines_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("window.lookback 7\n")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        load_config(path)


def test_missing_config_file_errors():
    with pytest.raises(ConfigError, match="config file not found"):
        load_config("/nonexistent/run.cfg")


def test_semantic_validation():
    with pytest.raises(ConfigError, match="train.model"):
        load_config(overrides=["train.model=transformer"])
    with pytest.raises(ConfigError, match="fractions"):
        load_config(overrides=["data.fractions=0.5,0.5"])
    with pytest.raises(ConfigError, match="must be >= 1"):
        load_config(overrides=["window.lookback=0"])
    with pytest.raises(ConfigError, match="loss weights"):
        load_config(overrides=["loss.beta_mmd=-1"])


def test_typed_subconfigs_round_through():
    cfg = load_config(overrides=["treatment.smooth_window=5", "window.lag=3",
                                 "train.lr=0.005", "loss.alpha_kl=0.02"])
    assert cfg.treatment_config().smooth_window == 5
    assert cfg.window_config().lag == 3
    assert cfg.trainer_config().lr == 0.005
    assert cfg.loss_weights().alpha_kl == 0.02
    assert cfg.synth_config(seed=7).seed == 7
    mc = cfg.model_config(("sit", "ssh", "u", "v", "vtot"), seed=2)
    assert mc.seed == 2 and mc.latent_dim == 32


def test_knowledge_keys_bind_to_physics_params():
    cfg = load_config(overrides=["knowledge.rho_w=1030", "knowledge.f=1.2e-4"])
    hp = cfg.hydrostatic_params(h_ice=0.5, h_ssh=0.1, h_s=0.05)
    assert hp.rho_w == 1030.0 and hp.rho_i == 917.0
    gp = cfg.geostrophic_params(deta_dx=1e-6, deta_dy=0.0)
    assert gp.f == 1.2e-4 and gp.g == 9.81


def test_override_returns_new_config():
    cfg = load_config()
    cfg2 = cfg.override("window.lag", 6)
    assert cfg["window.lag"] == 1
    assert cfg2["window.lag"] == 6


def test_unknown_key_get_raises():
    cfg = ExperimentConfig()
    with pytest.raises(ConfigError):
        cfg["no.such.key"]
