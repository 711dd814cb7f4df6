"""Loss terms, evaluation metrics, and gradient verification.

Losses (MSE, KL to the standard normal, RBF-kernel MMD) are torch functions
so they participate in autodiff during training; they accept array-likes and
return 0-dim tensors.  Metrics (PEHE, RMSE) are plain floats.  The MMD uses
the biased V-statistic, which is nonnegative and stable for the small
per-batch group sizes produced by binarized treatment grouping.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from .errors import DataError

logger = logging.getLogger(__name__)

# Batches where one MMD group was empty (contributed 0 instead of raising).
EMPTY_GROUP_COUNT = 0


@dataclass(frozen=True)
class LossWeights:
    alpha_kl: float = 0.01
    beta_mmd: float = 1.0

    def __post_init__(self):
        if self.alpha_kl < 0 or self.beta_mmd < 0:
            raise DataError("loss weights must be >= 0")


@dataclass(frozen=True)
class MMDConfig:
    bandwidth: float | str = "median"   # kernel width, or "median" heuristic per batch

    def __post_init__(self):
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "median":
                raise DataError(f"bandwidth must be a number or 'median', got {self.bandwidth!r}")
        elif self.bandwidth <= 0:
            raise DataError("bandwidth must be > 0")


def _as_tensor(x) -> torch.Tensor:
    # torch tensors keep their dtype (float32 training path); everything else
    # is computed in float64 so hand-checked values hold to tight tolerances
    if isinstance(x, torch.Tensor):
        return x if x.is_floating_point() else x.double()
    return torch.as_tensor(x, dtype=torch.float64)


def mse_loss(y_hat, y) -> torch.Tensor:
    """Mean squared error (1/N) * sum (y_hat - y)^2."""
    y_hat, y = _as_tensor(y_hat), _as_tensor(y)
    if y_hat.numel() == 0:
        raise DataError("mse_loss on empty input")
    if y_hat.shape != y.shape:
        raise DataError(f"shape mismatch: {tuple(y_hat.shape)} vs {tuple(y.shape)}")
    return torch.mean((y_hat - y) ** 2)


def kl_loss(mu, logvar) -> torch.Tensor:
    """KL divergence of N(mu, exp(logvar)) from N(0, I).

    -0.5 * sum_j (1 + logvar_j - mu_j^2 - exp(logvar_j)), summed over latent
    dimensions and averaged over the batch (a 1-D input is a single sample).
    """
    mu, logvar = _as_tensor(mu), _as_tensor(logvar)
    if not (torch.isfinite(mu).all() and torch.isfinite(logvar).all()):
        raise DataError("non-finite input to kl_loss")
    per = -0.5 * torch.sum(1.0 + logvar - mu ** 2 - torch.exp(logvar), dim=-1)
    return per.mean()


def rbf_kernel(x, y, sigma_k: float) -> torch.Tensor:
    """Gaussian kernel exp(-||x - y||^2 / (2 sigma^2)) between two vectors."""
    if sigma_k <= 0:
        raise DataError("kernel bandwidth must be > 0")
    x, y = _as_tensor(x), _as_tensor(y)
    if x.shape != y.shape:
        raise DataError("rbf_kernel requires equal-dimension vectors")
    return torch.exp(-torch.sum((x - y) ** 2) / (2.0 * sigma_k ** 2))


def median_bandwidth(points) -> float:
    """Median-heuristic bandwidth: sqrt(median pairwise squared distance / 2).

    Falls back to 1.0 when all points coincide (median distance zero).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = pts.shape[0]
    if n < 2:
        raise DataError("median_bandwidth needs at least 2 points")
    sq = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(n, k=1)
    med = float(np.median(sq[iu]))
    if med == 0.0:
        return 1.0
    return float(np.sqrt(med / 2.0))


def _gram(a: torch.Tensor, b: torch.Tensor, sigma_k: float) -> torch.Tensor:
    # direct differences, not the matmul trick: keeps the diagonal of
    # _gram(a, a) exactly 1 so mmd2(P, P) vanishes to round-off
    sq = torch.sum((a[:, None, :] - b[None, :, :]) ** 2, dim=-1)
    return torch.exp(-sq / (2.0 * sigma_k ** 2))


def mmd2(P, Q, cfg: MMDConfig = MMDConfig()) -> torch.Tensor:
    """Biased (V-statistic) squared MMD between two sets of vectors.

    mean k(P, P) + mean k(Q, Q) - 2 mean k(P, Q), always >= 0.  A 1-D input
    is interpreted as a single vector.  An empty group contributes 0
    (counted, not raised) so training keeps running when a batch happens to
    contain a single group.
    """
    global EMPTY_GROUP_COUNT
    P, Q = _as_tensor(P), _as_tensor(Q)
    if P.numel() == 0 or Q.numel() == 0:
        EMPTY_GROUP_COUNT += 1
        logger.debug("mmd2: empty group, contributing 0")
        dtype = P.dtype if P.numel() else (Q.dtype if Q.numel() else torch.float64)
        return torch.zeros((), dtype=dtype)
    P, Q = torch.atleast_2d(P), torch.atleast_2d(Q)
    if isinstance(cfg.bandwidth, str):
        sigma_k = median_bandwidth(torch.cat([P, Q]).detach().cpu().numpy())
    else:
        sigma_k = float(cfg.bandwidth)
    val = (_gram(P, P, sigma_k).mean()
           + _gram(Q, Q, sigma_k).mean()
           - 2.0 * _gram(P, Q, sigma_k).mean())
    return val.clamp_min(0.0)


def total_loss(l_pred, l_kl, l_mmd, w: LossWeights) -> torch.Tensor:
    """Composite objective: l_pred + alpha_kl * l_kl + beta_mmd * l_mmd."""
    return _as_tensor(l_pred) + w.alpha_kl * _as_tensor(l_kl) + w.beta_mmd * _as_tensor(l_mmd)


def pehe(tau_hat, tau) -> float:
    """Mean squared error between estimated and ground-truth effects (no root)."""
    tau_hat = np.asarray(tau_hat, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    if tau_hat.size == 0:
        raise DataError("pehe on empty input")
    if tau_hat.shape != tau.shape:
        raise DataError("pehe inputs must have equal length")
    return float(np.mean((tau_hat - tau) ** 2))


def rmse(y_hat, y) -> float:
    """Root of the mean squared prediction error."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.size == 0:
        raise DataError("rmse on empty input")
    if y_hat.shape != y.shape:
        raise DataError("rmse inputs must have equal length")
    return float(np.sqrt(np.mean((y_hat - y) ** 2)))


@dataclass(frozen=True)
class EvalReport:
    """Evaluation summary; serialized as a JSON document.

    ``pehe`` and ``pehe_zero`` are None in real-data mode (no ground-truth
    effects) and the corresponding keys are omitted from the JSON.
    ``pehe_zero`` is the zero-predictor reference, mean(tau^2).
    """

    rmse: float
    latent_mmd2: float
    n_samples: int
    lag: int
    seed: int
    config: dict
    pehe: float | None = None
    pehe_zero: float | None = None

    def to_json(self) -> str:
        import json

        doc = {"rmse": self.rmse, "latent_mmd2": self.latent_mmd2,
               "n_samples": self.n_samples, "lag": self.lag,
               "seed": self.seed, "config": self.config}
        if self.pehe is not None:
            doc["pehe"] = self.pehe
            doc["pehe_zero"] = self.pehe_zero
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "EvalReport":
        import json

        doc = json.loads(text)
        return EvalReport(rmse=doc["rmse"], latent_mmd2=doc["latent_mmd2"],
                          n_samples=doc["n_samples"], lag=doc["lag"],
                          seed=doc["seed"], config=doc["config"],
                          pehe=doc.get("pehe"), pehe_zero=doc.get("pehe_zero"))


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    passed: bool
    n_probes: int
    tol: float


def grad_check(loss_fn, params, probe_count: int = 20, tol: float = 1e-4,
               step: float = 1e-5, seed: int = 0) -> GradCheckReport:
    """Compare autograd gradients against central finite differences.

    ``loss_fn`` maps a flat float64 tensor to a scalar tensor.  Probes are
    ``probe_count`` seeded random coordinates; the relative error per probe is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
    """
    x0 = _as_tensor(params).detach().double().reshape(-1)
    x = x0.clone().requires_grad_(True)
    loss = loss_fn(x)
    if not torch.isfinite(loss):
        raise DataError("non-finite loss at gradient-check point")
    (analytic,) = torch.autograd.grad(loss, x)

    rng = np.random.Generator(np.random.PCG64(seed))
    coords = rng.integers(0, x0.numel(), size=probe_count)
    max_rel = 0.0
    for i in coords:
        i = int(i)
        xp = x0.clone()
        xp[i] += step
        xm = x0.clone()
        xm[i] -= step
        fp, fm = loss_fn(xp), loss_fn(xm)
        if not (torch.isfinite(fp) and torch.isfinite(fm)):
            raise DataError("non-finite loss at finite-difference probe")
        numeric = float((fp - fm) / (2.0 * step))
        a = float(analytic[i])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
        max_rel = max(max_rel, rel)
    return GradCheckReport(max_rel, max_rel < tol, probe_count, tol)
