"""Recurrent VAE with an adjacency-masked causal decoder.

A bidirectional GRU encodes the covariate window together with the treatment
and lagged-treatment channels into a Gaussian latent (default 32-d).  The
decoder runs one recurrent step per feature unit: unit i receives the
previous-step feature vector gated elementwise by row i of the adjacency
mask, concatenated with the latent sample, and a per-unit linear readout
produces that unit's output.  The mask comes from learnable logits with
knowledge-pinned edges (treatment and lagged treatment into the outcome) that
are forced active regardless of the logits.

The forward pass runs the factual and counterfactual trajectories through the
same parameters, reusing one noise draw so the treatment contrast is not
corrupted by independent sampling noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .errors import DataError
from .objectives import LossWeights, MMDConfig, kl_loss, mmd2, mse_loss, total_loss

TREAT_CHANNEL = "treat"
TREAT_LAG_CHANNEL = "treat_lag"


@dataclass(frozen=True)
class ModelConfig:
    feature_names: tuple[str, ...]
    outcome_feature: str = "sit"
    hidden_size: int = 64        # encoder GRU hidden size per direction
    latent_dim: int = 32
    decoder_hidden: int = 16     # hidden size of each per-unit decoder cell
    mask_mode: str = "soft"      # "soft" | "hard"
    mask_threshold: float = 0.5
    mask_l1: float = 0.0         # optional sparsity penalty on the soft mask, off by default
    adj_enabled: bool = True     # False replaces the mask with all-ones (ablation)
    seed: int = 0

    def __post_init__(self):
        if self.outcome_feature not in self.feature_names:
            raise DataError(f"outcome feature '{self.outcome_feature}' not in features")
        if self.latent_dim < 1 or self.hidden_size < 1 or self.decoder_hidden < 1:
            raise DataError("model sizes must be >= 1")
        if self.mask_mode not in ("soft", "hard"):
            raise DataError(f"mask_mode must be 'soft' or 'hard', got {self.mask_mode!r}")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def encoder_input_dim(self) -> int:
        # covariates + treatment channel + lagged-treatment channel
        return self.n_features + 2

    @property
    def decoder_names(self) -> tuple[str, ...]:
        return self.feature_names + (TREAT_CHANNEL, TREAT_LAG_CHANNEL)

    @property
    def decoder_dim(self) -> int:
        return self.n_features + 2

    @property
    def outcome_index(self) -> int:
        return self.feature_names.index(self.outcome_feature)


@dataclass
class ForwardOutput:
    y1_hat: torch.Tensor     # (B,) factual-trajectory prediction
    y2_hat: torch.Tensor     # (B,) counterfactual-trajectory prediction
    mu: torch.Tensor         # (B, d_z) factual-pass posterior mean
    logvar: torch.Tensor     # (B, d_z) factual-pass posterior log-variance
    z: torch.Tensor          # (B, d_z) latent used by the factual pass
    mask: torch.Tensor | None = None


class _HardThreshold(torch.autograd.Function):
    """Exact 0/1 threshold with straight-through gradient."""

    @staticmethod
    def forward(ctx, soft, threshold):
        return (soft >= threshold).to(soft.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output, None


def mask_from_logits(logits: torch.Tensor,
                     pinned_active: torch.Tensor | None = None,
                     pinned_inactive: torch.Tensor | None = None,
                     mode: str = "soft",
                     threshold: float = 0.5) -> torch.Tensor:
    """Adjacency mask from learnable logits with knowledge pins.

    Soft mode returns sigmoid(logits); hard mode thresholds at ``threshold``
    (ties go active) while passing gradients through the soft value.  Pinned
    entries override to exactly 1 (active) or 0 (excluded) in both modes.
    """
    soft = torch.sigmoid(logits)
    if mode == "soft":
        m = soft
    elif mode == "hard":
        m = _HardThreshold.apply(soft, threshold)
    else:
        raise DataError(f"unknown mask mode {mode!r}")
    if pinned_active is not None:
        m = torch.where(pinned_active, torch.ones_like(m), m)
    if pinned_inactive is not None:
        m = torch.where(pinned_inactive, torch.zeros_like(m), m)
    return m


def _seeded_uniform_init(module: nn.Module, seed: int) -> None:
    """Uniform fan-in init for weights, zeros for biases, in name order."""
    gen = torch.Generator().manual_seed(seed)
    for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
        with torch.no_grad():
            if name.endswith("mask_logits"):
                p.zero_()
            elif "bias" in name:
                p.zero_()
            else:
                fan_in = p.shape[-1] if p.dim() > 1 else p.shape[0]
                bound = 1.0 / math.sqrt(fan_in)
                p.uniform_(-bound, bound, generator=gen)


class KgcmVae(nn.Module):
    """Knowledge-guided causal VAE over windowed dual-trajectory samples."""

    needs_eps = True

    def __init__(self, cfg: ModelConfig, loss_weights: LossWeights = LossWeights(),
                 mmd_cfg: MMDConfig = MMDConfig()):
        super().__init__()
        self.cfg = cfg
        self.loss_weights = loss_weights
        self.mmd_cfg = mmd_cfg
        p_dec = cfg.decoder_dim
        self.encoder = nn.GRU(cfg.encoder_input_dim, cfg.hidden_size,
                              batch_first=True, bidirectional=True)
        self.fc_mu = nn.Linear(2 * cfg.hidden_size, cfg.latent_dim)
        self.fc_logvar = nn.Linear(2 * cfg.hidden_size, cfg.latent_dim)
        self.decoder_cells = nn.ModuleList(
            nn.GRUCell(p_dec + cfg.latent_dim, cfg.decoder_hidden) for _ in range(p_dec)
        )
        self.readouts = nn.ModuleList(
            nn.Linear(cfg.decoder_hidden, 1) for _ in range(p_dec)
        )
        self.mask_logits = nn.Parameter(torch.zeros(p_dec, p_dec))

        pinned = torch.zeros(p_dec, p_dec, dtype=torch.bool)
        y = cfg.outcome_index
        pinned[y, cfg.decoder_names.index(TREAT_CHANNEL)] = True
        pinned[y, cfg.decoder_names.index(TREAT_LAG_CHANNEL)] = True
        self.register_buffer("pinned_active", pinned)
        self.register_buffer("pinned_inactive", torch.zeros_like(pinned))

        _seeded_uniform_init(self, cfg.seed)

    # ---- components -------------------------------------------------------

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Map a (B, L, p+2) window to posterior (mu, logvar), each (B, d_z)."""
        if x.dim() != 3 or x.shape[-1] != self.cfg.encoder_input_dim:
            raise DataError(
                f"encoder expects (B, L, {self.cfg.encoder_input_dim}), got {tuple(x.shape)}"
            )
        if not torch.isfinite(x).all():
            raise DataError("non-finite encoder input")
        _, h_n = self.encoder(x)            # h_n: (2, B, hidden)
        h = torch.cat([h_n[0], h_n[1]], dim=-1)
        return self.fc_mu(h), self.fc_logvar(h)

    @staticmethod
    def reparameterize(mu: torch.Tensor, logvar: torch.Tensor,
                       eps: torch.Tensor | None = None,
                       sampling_enabled: bool = True) -> torch.Tensor:
        """z = mu + exp(0.5 logvar) * eps when sampling; z = mu otherwise."""
        if not sampling_enabled:
            return mu
        if eps is None:
            raise DataError("sampling requires an externally drawn eps")
        return mu + torch.exp(0.5 * logvar) * eps

    def current_mask(self, mode: str | None = None) -> torch.Tensor:
        """Adjacency mask under the configured (or overridden) mode."""
        if not self.cfg.adj_enabled:
            return torch.ones_like(self.mask_logits)
        return mask_from_logits(self.mask_logits, self.pinned_active,
                                self.pinned_inactive,
                                mode or self.cfg.mask_mode,
                                self.cfg.mask_threshold)

    def decode(self, z: torch.Tensor, x_dec: torch.Tensor,
               mask: torch.Tensor) -> torch.Tensor:
        """Per-unit outputs (B, p_dec) from one masked recurrent step each.

        Unit i consumes [(x_dec * mask[i]), z]; a zero mask entry makes the
        unit exactly invariant to that input feature.
        """
        if x_dec.shape[-1] != self.cfg.decoder_dim:
            raise DataError(
                f"decoder expects {self.cfg.decoder_dim} features, got {x_dec.shape[-1]}"
            )
        B = x_dec.shape[0]
        h0 = x_dec.new_zeros(B, self.cfg.decoder_hidden)
        outs = []
        for i, (cell, readout) in enumerate(zip(self.decoder_cells, self.readouts)):
            gated = x_dec * mask[i]
            h = cell(torch.cat([gated, z], dim=-1), h0)
            outs.append(readout(h))
        return torch.cat(outs, dim=-1)

    # ---- full passes ------------------------------------------------------

    def _traj(self, x_hist, t_hist, t_lag, eps, training, mask):
        enc_in = torch.cat([x_hist, t_hist.unsqueeze(-1), t_lag.unsqueeze(-1)], dim=-1)
        mu, logvar = self.encode(enc_in)
        z = self.reparameterize(mu, logvar, eps, sampling_enabled=training)
        x_dec = torch.cat([x_hist[:, -1, :], t_hist[:, -1:], t_lag[:, -1:]], dim=-1)
        units = self.decode(z, x_dec, mask)
        return units[:, self.cfg.outcome_index], mu, logvar, z

    def forward(self, batch, training: bool = False,
                eps: torch.Tensor | None = None) -> ForwardOutput:
        """Dual-trajectory pass sharing parameters and the noise draw.

        ``batch`` provides torch tensors x_hist, t1_hist, t1_lag, t2_hist,
        t2_lag (see training.TorchBatch).  The returned posterior and latent
        are the factual pass's.
        """
        mask = self.current_mask()
        y1_hat, mu, logvar, z = self._traj(
            batch.x_hist, batch.t1_hist, batch.t1_lag, eps, training, mask)
        y2_hat, _, _, _ = self._traj(
            batch.x_hist, batch.t2_hist, batch.t2_lag, eps, training, mask)
        return ForwardOutput(y1_hat, y2_hat, mu, logvar, z, mask)

    @torch.no_grad()
    def predict_ite(self, batch) -> torch.Tensor:
        """Estimated effect yhat(factual) - yhat(counterfactual), no sampling."""
        out = self.forward(batch, training=False)
        return out.y1_hat - out.y2_hat

    def composite_loss(self, batch, eps: torch.Tensor):
        """Training objective: dual-trajectory MSE + weighted KL + latent MMD.

        The MMD balances the posterior means of the two treatment groups
        within the batch; the optional mask-sparsity penalty (mask_l1) is an
        off-by-default extension.
        """
        out = self.forward(batch, training=True, eps=eps)
        l_pred = mse_loss(out.y1_hat, batch.y1)
        if batch.y2 is not None:
            l_pred = l_pred + mse_loss(out.y2_hat, batch.y2)
        l_kl = kl_loss(out.mu, out.logvar)
        g = batch.group_label.bool()
        # balance mu, not sampled z: the KL holds the posterior std near 1,
        # which swamps the far smaller group structure that evaluation measures
        l_mmd = mmd2(out.mu[g], out.mu[~g], self.mmd_cfg)
        total = total_loss(l_pred, l_kl, l_mmd, self.loss_weights)
        if self.cfg.mask_l1 > 0 and self.cfg.adj_enabled:
            free = ~(self.pinned_active | self.pinned_inactive)
            total = total + self.cfg.mask_l1 * torch.sigmoid(self.mask_logits)[free].mean()
        return total, {"l_pred": l_pred, "l_kl": l_kl, "l_mmd": l_mmd}

    @torch.no_grad()
    def evaluate_batch(self, batch):
        """Eval-mode predictions plus the latent used for balance metrics."""
        out = self.forward(batch, training=False)
        return out.y1_hat, out.y2_hat, out.mu


def expected_parameter_count(cfg: ModelConfig) -> int:
    """Closed-form parameter count; must match the instantiated model."""
    p_in = cfg.encoder_input_dim
    h = cfg.hidden_size
    d = cfg.latent_dim
    dh = cfg.decoder_hidden
    pd = cfg.decoder_dim
    encoder = 2 * (3 * h * p_in + 3 * h * h + 6 * h)
    heads = 2 * (d * 2 * h + d)
    cells = pd * (3 * dh * (pd + d) + 3 * dh * dh + 6 * dh)
    readouts = pd * (dh + 1)
    return encoder + heads + cells + readouts + pd * pd
