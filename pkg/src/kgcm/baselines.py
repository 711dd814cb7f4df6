"""Recurrent baseline estimators trained and scored by the shared pipeline.

Three capacity-matched adaptations of standard effect estimators:

* ``r_tarnet``  -- shared bidirectional recurrent trunk over the covariate
  history with two feedforward heads, one per treatment trajectory.
* ``cf_rnn``    -- one trunk over [covariates || treatment history] and a
  single head; the counterfactual prediction swaps the treatment channel.
* ``r_crn``     -- cf_rnn plus an MMD penalty between the trunk
  representations of the two treatment groups (balance weight 0 makes it
  output-equivalent to cf_rnn under a shared seed).

All variants consume the same windowed samples and are scored by the same
evaluation pipeline as the main model.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import DataError
from .model import _seeded_uniform_init
from .objectives import MMDConfig, mmd2, mse_loss

VARIANTS = ("r_tarnet", "cf_rnn", "r_crn")


@dataclass(frozen=True)
class BaselineSpec:
    variant: str = "r_tarnet"
    trunk_hidden: int = 64
    head_hidden: int = 32
    balance_weight: float = 1.0   # only r_crn uses it
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DataError(f"unknown baseline variant {self.variant!r}")
        if self.trunk_hidden < 1 or self.head_hidden < 1:
            raise DataError("baseline sizes must be >= 1")


def _head(in_dim: int, hidden: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(in_dim, hidden), nn.ReLU(), nn.Linear(hidden, 1))


class RTarnet(nn.Module):
    """Treatment-agnostic trunk with separate factual/counterfactual heads."""

    needs_eps = False

    def __init__(self, n_features: int, spec: BaselineSpec):
        super().__init__()
        self.spec = spec
        self.trunk = nn.GRU(n_features, spec.trunk_hidden,
                            batch_first=True, bidirectional=True)
        rep = 2 * spec.trunk_hidden
        self.head_factual = _head(rep, spec.head_hidden)
        self.head_counterfactual = _head(rep, spec.head_hidden)
        _seeded_uniform_init(self, spec.seed)

    def represent(self, batch) -> torch.Tensor:
        _, h_n = self.trunk(batch.x_hist)
        return torch.cat([h_n[0], h_n[1]], dim=-1)

    def forward(self, batch):
        rep = self.represent(batch)
        y1_hat = self.head_factual(rep).squeeze(-1)
        y2_hat = self.head_counterfactual(rep).squeeze(-1)
        return y1_hat, y2_hat, rep

    def composite_loss(self, batch, eps=None):
        y1_hat, y2_hat, _ = self.forward(batch)
        l_pred = mse_loss(y1_hat, batch.y1)
        if batch.y2 is not None:
            l_pred = l_pred + mse_loss(y2_hat, batch.y2)
        zero = torch.zeros((), dtype=l_pred.dtype)
        return l_pred, {"l_pred": l_pred, "l_kl": zero, "l_mmd": zero}

    @torch.no_grad()
    def evaluate_batch(self, batch):
        return self.forward(batch)


class CfRnn(nn.Module):
    """Single trunk over [covariates || treatment]; head shared across trajectories.

    With ``balance_weight`` > 0 (the r_crn variant) an MMD penalty between the
    factual representations of the two treatment groups is added to the loss.
    """

    needs_eps = False

    def __init__(self, n_features: int, spec: BaselineSpec,
                 mmd_cfg: MMDConfig = MMDConfig()):
        super().__init__()
        self.spec = spec
        self.mmd_cfg = mmd_cfg
        self.trunk = nn.GRU(n_features + 1, spec.trunk_hidden,
                            batch_first=True, bidirectional=True)
        self.head = _head(2 * spec.trunk_hidden, spec.head_hidden)
        _seeded_uniform_init(self, spec.seed)

    def _represent(self, x_hist, t_hist) -> torch.Tensor:
        _, h_n = self.trunk(torch.cat([x_hist, t_hist.unsqueeze(-1)], dim=-1))
        return torch.cat([h_n[0], h_n[1]], dim=-1)

    def forward(self, batch):
        rep1 = self._represent(batch.x_hist, batch.t1_hist)
        rep2 = self._represent(batch.x_hist, batch.t2_hist)
        y1_hat = self.head(rep1).squeeze(-1)
        y2_hat = self.head(rep2).squeeze(-1)
        return y1_hat, y2_hat, rep1

    def composite_loss(self, batch, eps=None):
        y1_hat, y2_hat, rep1 = self.forward(batch)
        l_pred = mse_loss(y1_hat, batch.y1)
        if batch.y2 is not None:
            l_pred = l_pred + mse_loss(y2_hat, batch.y2)
        zero = torch.zeros((), dtype=l_pred.dtype)
        parts = {"l_pred": l_pred, "l_kl": zero, "l_mmd": zero}
        total = l_pred
        if self.spec.variant == "r_crn" and self.spec.balance_weight > 0:
            g = batch.group_label.bool()
            l_mmd = mmd2(rep1[g], rep1[~g], self.mmd_cfg)
            parts["l_mmd"] = l_mmd
            total = total + self.spec.balance_weight * l_mmd
        return total, parts

    @torch.no_grad()
    def evaluate_batch(self, batch):
        return self.forward(batch)


def build_baseline(spec: BaselineSpec, n_features: int,
                   mmd_cfg: MMDConfig = MMDConfig()) -> nn.Module:
    if spec.variant == "r_tarnet":
        return RTarnet(n_features, spec)
    return CfRnn(n_features, spec, mmd_cfg)


def baseline_forward(spec: BaselineSpec, sample, model: nn.Module | None = None):
    """Run one sample through a baseline; builds the model from ``spec`` if needed.

    Returns (y1_hat, y2_hat, representation) as floats/array.
    """
    from .training import to_torch_batch
    from .windowing import stack_samples

    if model is None:
        model = build_baseline(spec, sample.x_hist.shape[-1])
    model.eval()
    batch = to_torch_batch(stack_samples([sample]))
    y1_hat, y2_hat, rep = model.evaluate_batch(batch)
    return float(y1_hat[0]), float(y2_hat[0]), rep[0].numpy()


def baseline_train(spec: BaselineSpec, train_samples, val_samples, trainer_cfg):
    """Train a baseline with the shared trainer; returns (model, TrainResult)."""
    from .training import train_model

    n_features = train_samples[0].x_hist.shape[-1]
    model = build_baseline(spec, n_features)
    result = train_model(model, train_samples, val_samples, trainer_cfg)
    return model, result
