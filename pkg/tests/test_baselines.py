from __future__ import annotations

import numpy as np
import pytest
import torch

from kgcm.baselines import (BaselineSpec, CfRnn, RTarnet, baseline_forward,
                            baseline_train, build_baseline)
from kgcm.demo import make_demo_frame
from kgcm.errors import DataError
from kgcm.experiment import prepare_from_frame
from kgcm.objectives import pehe
from kgcm.training import TrainerConfig, to_torch_batch
from kgcm.windowing import stack_samples


@pytest.fixture(scope="module")
def tiny_prep(small_prepared):
    prep, cfg = small_prepared
    return prep


def test_spec_rejects_unknown_variant():
    with pytest.raises(DataError, match="unknown baseline variant"):
        BaselineSpec(variant="tarnet_3000")


def test_build_dispatches_variants():
    assert isinstance(build_baseline(BaselineSpec(variant="r_tarnet"), 5), RTarnet)
    assert isinstance(build_baseline(BaselineSpec(variant="cf_rnn"), 5), CfRnn)
    assert isinstance(build_baseline(BaselineSpec(variant="r_crn"), 5), CfRnn)


def test_cf_rnn_identical_treatments_agree(tiny_prep):
    sample = tiny_prep["train"].samples[0]
    for variant in ("cf_rnn", "r_crn"):
        model = build_baseline(BaselineSpec(variant=variant, seed=0), 5)
        tb = to_torch_batch(stack_samples([sample]))
        tb.t2_hist = tb.t1_hist.clone()
        y1_hat, y2_hat, _ = model.evaluate_batch(tb)
        assert torch.equal(y1_hat, y2_hat)


def test_r_tarnet_symmetric_heads_agree(tiny_prep):
    sample = tiny_prep["train"].samples[0]
    model = build_baseline(BaselineSpec(variant="r_tarnet", seed=0), 5)
    model.head_counterfactual.load_state_dict(model.head_factual.state_dict())
    y1_hat, y2_hat, _ = baseline_forward(model.spec, sample, model=model)
    assert y1_hat == y2_hat


def test_baseline_forward_deterministic(tiny_prep):
    sample = tiny_prep["train"].samples[3]
    spec = BaselineSpec(variant="cf_rnn", seed=7)
    a = baseline_forward(spec, sample)
    b = baseline_forward(spec, sample)
    assert a[0] == b[0] and a[1] == b[1]
    assert np.array_equal(a[2], b[2])


def test_r_crn_weight_zero_equals_cf_rnn(tiny_prep):
    # identical shapes and seed: parameters coincide, so outputs coincide
    crn = build_baseline(BaselineSpec(variant="r_crn", balance_weight=0.0, seed=3), 5)
    cf = build_baseline(BaselineSpec(variant="cf_rnn", seed=3), 5)
    tb = to_torch_batch(stack_samples(tiny_prep["val"].samples))
    y1_a, y2_a, _ = crn.evaluate_batch(tb)
    y1_b, y2_b, _ = cf.evaluate_batch(tb)
    assert torch.equal(y1_a, y1_b) and torch.equal(y2_a, y2_b)
    total_a, _ = crn.composite_loss(tb)
    total_b, _ = cf.composite_loss(tb)
    assert torch.equal(total_a, total_b)


def test_r_crn_balance_penalty_enters_loss(tiny_prep):
    # full train split guarantees both treatment groups are present
    tb = to_torch_batch(stack_samples(tiny_prep["train"].samples))
    crn = build_baseline(BaselineSpec(variant="r_crn", balance_weight=5.0, seed=1), 5)
    with torch.no_grad():
        total, parts = crn.composite_loss(tb)
    assert float(parts["l_mmd"]) > 0
    assert float(total) == pytest.approx(
        float(parts["l_pred"]) + 5.0 * float(parts["l_mmd"]), rel=1e-6)


def test_baseline_train_smoke_and_determinism(tiny_prep):
    spec = BaselineSpec(variant="r_tarnet", seed=0)
    tcfg = TrainerConfig(max_epochs=1, batch_size=32, seed=0, shuffle_seed=0)
    train = tiny_prep["train"].samples[:40]
    val = tiny_prep["val"].samples[:20]
    _, res1 = baseline_train(spec, train, val, tcfg)
    _, res2 = baseline_train(spec, train, val, tcfg)
    assert res1.n_epochs == 1
    assert res1.best_val_mse == res2.best_val_mse
    assert res1.log == res2.log


def test_zero_effect_data_approaches_zero_predictor():
    # with beta_eff = 0 the true effect is identically zero, so the
    # zero-predictor oracle scores PEHE = 0 exactly; a trained baseline must
    # approach it: its PEHE is small both absolutely (standardized units) and
    # relative to its own prediction error
    from kgcm.config import load_config
    from kgcm.objectives import mse_loss

    cfg = load_config(overrides=["synth.beta_eff=0.0", "synth.noise_sd=0.0",
                                 "train.max_epochs=60", "train.patience=10"])
    prep = prepare_from_frame(make_demo_frame(300, seed=1), cfg)
    spec = BaselineSpec(variant="r_tarnet", seed=0)
    model, _ = baseline_train(spec, prep["train"].samples, prep["val"].samples,
                              cfg.trainer_config())
    tb = to_torch_batch(stack_samples(prep["test"].samples))
    y1_hat, y2_hat, _ = model.evaluate_batch(tb)
    tau = tb.tau.numpy()
    assert np.allclose(tau, 0.0)
    assert pehe(np.zeros_like(tau), tau) == 0.0    # the oracle reference
    model_pehe = pehe((y1_hat - y2_hat).numpy(), tau)
    factual_mse = float(mse_loss(y1_hat, tb.y1))
    assert model_pehe < 0.02                        # near zero in absolute terms
    assert model_pehe < 0.15 * factual_mse          # and far below prediction error
