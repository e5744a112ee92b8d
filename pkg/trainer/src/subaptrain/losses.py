"""Composite training objective: weighted l2 + (1 - SSIM) + KDE distance.

Default weights (0.2, 0.3, 0.5). The SSIM term uses the same parameters the
evaluation side uses (11x11 Gaussian window, sigma 1.5, k1 0.01, k2 0.03,
data range 1, valid windows only), so the corner setting (0, 1, 0) is
directly comparable with reported SSIM values. The KDE term is the L1 gap
between Gaussian kernel density estimates of prediction and target values
on a fixed [0, 1] grid, each renormalized to unit mass; bandwidths follow
Silverman's rule and are treated as constants for autograd.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.2   # l2
    beta: float = 0.3    # 1 - SSIM
    gamma: float = 0.5   # KDE

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be >= 0")


def _gaussian_kernel(window: int, sigma: float, dtype, device):
    half = (window - 1) / 2.0
    coords = torch.arange(window, dtype=dtype, device=device) - half
    g = torch.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    kernel = torch.outer(g, g)
    return (kernel / kernel.sum()).reshape(1, 1, window, window)


def ssim_torch(pred, target, window: int = 11, sigma: float = 1.5,
               k1: float = 0.01, k2: float = 0.03):
    """Mean local SSIM over valid window positions; inputs are (B, 1, H, W)."""
    if pred.shape != target.shape:
        raise ValueError("pred and target shapes differ")
    if min(pred.shape[-2:]) < window:
        raise ValueError(f"inputs smaller than the {window}x{window} window")
    kernel = _gaussian_kernel(window, sigma, pred.dtype, pred.device)
    c1, c2 = k1 ** 2, k2 ** 2
    mu_p = F.conv2d(pred, kernel)
    mu_t = F.conv2d(target, kernel)
    m_pp = F.conv2d(pred * pred, kernel)
    m_tt = F.conv2d(target * target, kernel)
    m_pt = F.conv2d(pred * target, kernel)
    var_p = m_pp - mu_p ** 2
    var_t = m_tt - mu_t ** 2
    cov = m_pt - mu_p * mu_t
    ssim_map = ((2 * mu_p * mu_t + c1) * (2 * cov + c2)) / \
               ((mu_p ** 2 + mu_t ** 2 + c1) * (var_p + var_t + c2))
    return ssim_map.mean()


def _silverman_bandwidth(samples, grid_points):
    n = samples.numel()
    std = samples.std(unbiased=True) if n > 1 else samples.new_tensor(0.0)
    q = torch.quantile(samples, samples.new_tensor([0.25, 0.75]))
    iqr = q[1] - q[0]
    scale = torch.minimum(std, iqr / 1.349) if iqr > 0 else std
    h = 0.9 * scale * n ** (-0.2)
    floor = samples.new_tensor(1.0 / grid_points)
    return torch.maximum(h, floor).detach()


KDE_SAMPLE_CAP = 4096

_SUBSAMPLE_CACHE: dict = {}


def _subsample_indices(numel: int, cap: int):
    """Fixed pseudo-random pixel subset, deterministic per (numel, cap)."""
    key = (numel, cap)
    if key not in _SUBSAMPLE_CACHE:
        import numpy as np

        rng = np.random.default_rng(0x5D17)
        idx = np.sort(rng.choice(numel, size=cap, replace=False))
        _SUBSAMPLE_CACHE[key] = torch.from_numpy(idx)
    return _SUBSAMPLE_CACHE[key]


def kde_density(samples, grid_points: int = 256,
                sample_cap: int = KDE_SAMPLE_CAP):
    """Unit-mass Gaussian KDE of flattened samples on a [0, 1] grid.

    Large batches are cut to a fixed pseudo-random sample_cap subset (the
    same positions every call), which bounds the grid-by-sample broadcast
    the backward pass has to carry without exposing a spatial lattice the
    model could game.
    """
    flat = samples.reshape(-1)
    if sample_cap and flat.numel() > sample_cap:
        flat = flat[_subsample_indices(flat.numel(), sample_cap)]
    grid = torch.linspace(0.0, 1.0, grid_points, dtype=flat.dtype,
                          device=flat.device)
    h = _silverman_bandwidth(flat, grid_points)
    z = (grid[:, None] - flat[None, :]) / h
    f = torch.exp(-0.5 * z * z).sum(dim=1) / \
        (flat.numel() * h * math.sqrt(2.0 * math.pi))
    dx = 1.0 / (grid_points - 1)
    return f / (f.sum() * dx)


def kde_term(pred, target, grid_points: int = 256):
    dx = 1.0 / (grid_points - 1)
    fp = kde_density(pred, grid_points)
    ft = kde_density(target, grid_points)
    return (fp - ft).abs().sum() * dx


def composite_loss(pred, target, weights: LossWeights = LossWeights(),
                   grid_points: int = 256):
    """Eq-style weighted objective; returns (loss, components dict).

    Zero-weight terms are skipped entirely, so corner settings reduce to the
    bare component exactly.
    """
    components = {}
    loss = pred.new_tensor(0.0)
    if weights.alpha != 0.0:
        mse = F.mse_loss(pred, target)
        components["l2"] = mse
        loss = loss + weights.alpha * mse
    if weights.beta != 0.0:
        ssim_value = ssim_torch(pred, target)
        components["ssim"] = ssim_value
        loss = loss + weights.beta * (1.0 - ssim_value)
    if weights.gamma != 0.0:
        kde = kde_term(pred, target, grid_points)
        components["kde"] = kde
        loss = loss + weights.gamma * kde
    return loss, components
