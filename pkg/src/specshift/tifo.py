"""Learnable spectral re-weighting driven by per-frequency stability scores.

Two independent two-layer MLPs map a fixed (K, C) score table to per-bin
weights, one set for the real coefficients and one for the imaginary ones.
A window is re-weighted by transforming it to the frequency domain, scaling
coefficient (k, c) by the corresponding weight, and inverting back.  The
score table is a constant of the layer: gradients flow to the MLP parameters
and to the input series, never into the scores.

Initialization makes the layer an exact identity: hidden weights are
Xavier-uniform, output weights start at zero, and the output bias starts at
one, so every weight is exactly 1.0 before the first update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    dft_forward,
    dft_forward_adjoint,
    dft_inverse,
    hermitian_multiplicity,
    n_bins,
)


@dataclass(frozen=True)
class TifoConfig:
    hidden: int = 128
    alpha: float = 1.0
    keep: int | None = None  # retain the lowest `keep` bins; None keeps all
    score_metric: str = "mu_sigma"
    score_eps: float = 1e-5
    window: str = "rectangular"
    ema_decay: float | None = None  # eval-time score refresh, None disables


def init_params(bins: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Parameters for the two weighting MLPs; the real net is drawn first."""
    if bins < 1 or hidden < 1:
        raise ValueError("bins and hidden width must be positive")
    params: dict[str, np.ndarray] = {}
    a = np.sqrt(6.0 / (bins + hidden))
    for part in ("r", "i"):
        params[f"{part}.w1"] = rng.uniform(-a, a, size=(hidden, bins))
        params[f"{part}.b1"] = np.zeros(hidden)
        params[f"{part}.w2"] = np.zeros((bins, hidden))
        params[f"{part}.b2"] = np.ones(bins)
    return params


def _net_forward(params: dict[str, np.ndarray], part: str, score_table: np.ndarray):
    pre = params[f"{part}.w1"] @ score_table + params[f"{part}.b1"][:, None]
    hid = np.maximum(pre, 0.0)
    lam = params[f"{part}.w2"] @ hid + params[f"{part}.b2"][:, None]
    return lam, pre, hid


def weights_forward(params: dict[str, np.ndarray], score_table: np.ndarray):
    """Map a (K, C) score table to (lambda_r, lambda_i, cache)."""
    score_table = np.asarray(score_table, dtype=float)
    if score_table.ndim != 2:
        raise ValueError("expected a (K, C) score table")
    lam_r, pre_r, hid_r = _net_forward(params, "r", score_table)
    lam_i, pre_i, hid_i = _net_forward(params, "i", score_table)
    cache = (score_table, pre_r, hid_r, pre_i, hid_i)
    return lam_r, lam_i, cache


def weights_vjp(
    params: dict[str, np.ndarray],
    cache,
    g_lambda_r: np.ndarray,
    g_lambda_i: np.ndarray,
) -> dict[str, np.ndarray]:
    """Backprop (K, C) weight cotangents to MLP parameter gradients."""
    score_table, pre_r, hid_r, pre_i, hid_i = cache
    grads: dict[str, np.ndarray] = {}
    for part, pre, hid, g_lam in (
        ("r", pre_r, hid_r, g_lambda_r),
        ("i", pre_i, hid_i, g_lambda_i),
    ):
        grads[f"{part}.w2"] = g_lam @ hid.T
        grads[f"{part}.b2"] = g_lam.sum(axis=1)
        g_hid = params[f"{part}.w2"].T @ g_lam
        g_pre = g_hid * (pre > 0.0)
        grads[f"{part}.w1"] = g_pre @ score_table.T
        grads[f"{part}.b1"] = g_pre.sum(axis=1)
    return grads


def alpha_scale(lam: np.ndarray, alpha: float) -> np.ndarray:
    """Interpolate weights toward the identity: 1 + alpha * (lam - 1).

    alpha = 1 keeps the learned weights, alpha = 0 removes the layer.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return 1.0 + alpha * (np.asarray(lam, dtype=float) - 1.0)


def _keep_mask(bins: int, keep: int | None) -> np.ndarray | None:
    if keep is None:
        return None
    if not 1 <= keep <= bins:
        raise ValueError(f"keep must be in [1, {bins}]")
    if keep == bins:
        return None
    mask = np.zeros(bins)
    mask[:keep] = 1.0
    return mask


def transform(
    x: np.ndarray,
    lam_r: np.ndarray,
    lam_i: np.ndarray,
    keep: int | None = None,
) -> np.ndarray:
    """Re-weight a window (or stack of windows) in the frequency domain.

    x : (..., L, C); weights are (K, C).  Bins at index >= keep are zeroed.
    """
    x = np.asarray(x, dtype=float)
    length = x.shape[-2]
    real, imag = dft_forward(x, axis=-2)
    return weighted_inverse(real, imag, lam_r, lam_i, length, keep)


def weighted_inverse(
    real: np.ndarray,
    imag: np.ndarray,
    lam_r: np.ndarray,
    lam_i: np.ndarray,
    length: int,
    keep: int | None = None,
) -> np.ndarray:
    """Inverse transform of a spectrum scaled per (bin, channel)."""
    w_real = real * lam_r
    w_imag = imag * lam_i
    mask = _keep_mask(real.shape[-2], keep)
    if mask is not None:
        w_real = w_real * mask[:, None]
        w_imag = w_imag * mask[:, None]
    return dft_inverse(w_real, w_imag, length, axis=-2)


def transform_vjp(
    upstream: np.ndarray,
    real: np.ndarray,
    imag: np.ndarray,
    lam_r: np.ndarray,
    lam_i: np.ndarray,
    length: int,
    keep: int | None = None,
):
    """VJP of ``weighted_inverse`` w.r.t. the input series and the weights.

    Because the DFT and its inverse are linear, the cotangent of the weighted
    spectrum is just the forward DFT of the upstream gradient scaled by the
    Hermitian multiplicities over L.

    Returns (grad_x, g_lambda_r, g_lambda_i); weight gradients are summed
    over leading (batch) axes to shape (K, C).
    """
    upstream = np.asarray(upstream, dtype=float)
    gu_real, gu_imag = dft_forward(upstream, axis=-2)
    scale = hermitian_multiplicity(length) / length
    g_wreal = gu_real * scale[:, None]
    g_wimag = gu_imag * scale[:, None]
    mask = _keep_mask(real.shape[-2], keep)
    if mask is not None:
        g_wreal = g_wreal * mask[:, None]
        g_wimag = g_wimag * mask[:, None]
    g_lambda_r = g_wreal * real
    g_lambda_i = g_wimag * imag
    while g_lambda_r.ndim > 2:
        g_lambda_r = g_lambda_r.sum(axis=0)
        g_lambda_i = g_lambda_i.sum(axis=0)
    grad_x = dft_forward_adjoint(g_wreal * lam_r, g_wimag * lam_i, length, axis=-2)
    return grad_x, g_lambda_r, g_lambda_i


def expected_bins(length: int, keep: int | None = None) -> int:
    """Bin count K for a window length, independent of truncation (weights span all K)."""
    k = n_bins(length)
    if keep is not None and not 1 <= keep <= k:
        raise ValueError(f"keep must be in [1, {k}]")
    return k
