"""Normalization baselines: instance z-scoring, patch-statistic prediction,
and top-k frequency decomposition.

Each baseline exposes the pieces the training pipelines compose explicitly;
none of them owns a training loop (the two-stage schedule for the patch
predictor lives in the training module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import amplitude, dft_forward, dft_inverse, n_bins

REVIN_EPS = 1e-5
PATCH_EPS = 1e-5


# ---------------------------------------------------------------------------
# instance z-score with learnable affine (RevIN)
# ---------------------------------------------------------------------------


def revin_init(channels: int) -> dict[str, np.ndarray]:
    return {"gamma": np.ones(channels), "beta": np.zeros(channels)}


def revin_stats(x: np.ndarray, eps: float = REVIN_EPS) -> tuple[np.ndarray, np.ndarray]:
    """Per-window, per-channel mean and sqrt(population variance + eps)."""
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=-2, keepdims=True)
    sigma = np.sqrt(x.var(axis=-2, keepdims=True) + eps)
    return mu, sigma


def revin_normalize(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=float) - mu) / sigma


def revin_denormalize(y_norm, mu, sigma, gamma, beta) -> np.ndarray:
    """gamma * (y_norm * sigma + mu) + beta, broadcast per channel."""
    return gamma * (np.asarray(y_norm, dtype=float) * sigma + mu) + beta


def revin_denorm_vjp(upstream, y_norm, mu, sigma):
    """Grads of the denormalized output w.r.t. (y_norm, gamma, beta)."""
    g_gamma = (upstream * (y_norm * sigma + mu)).sum(axis=(0, 1))
    g_beta = upstream.sum(axis=(0, 1))
    return g_gamma, g_beta


# ---------------------------------------------------------------------------
# patch-statistic normalization (SAN)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SanConfig:
    patch: int = 12
    hidden: int = 64
    epochs: int = 5
    lr: float = 1e-3


def san_patch_stats(x: np.ndarray, patch: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-patch mean and population variance; the time axis must divide evenly."""
    x = np.asarray(x, dtype=float)
    n, t, c = x.shape
    if t % patch != 0:
        raise ValueError(f"series length {t} is not divisible by patch {patch}")
    blocks = x.reshape(n, t // patch, patch, c)
    return blocks.mean(axis=2), blocks.var(axis=2)


def san_init(lookback: int, horizon: int, patch: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Two predictor nets (mean and variance), shared across channels."""
    if lookback % patch or horizon % patch:
        raise ValueError("lookback and horizon must be divisible by the patch length")
    d_in = 2 * (lookback // patch)
    d_out = horizon // patch
    params: dict[str, np.ndarray] = {}
    for stat in ("mu", "var"):
        a1 = np.sqrt(6.0 / (d_in + hidden))
        a2 = np.sqrt(6.0 / (hidden + d_out))
        params[f"{stat}.w1"] = rng.uniform(-a1, a1, size=(hidden, d_in))
        params[f"{stat}.b1"] = np.zeros(hidden)
        params[f"{stat}.w2"] = rng.uniform(-a2, a2, size=(d_out, hidden))
        params[f"{stat}.b2"] = np.zeros(d_out)
    return params


def softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _san_net(params, stat, feats):
    pre = np.einsum("hd,ndc->nhc", params[f"{stat}.w1"], feats) + params[f"{stat}.b1"][None, :, None]
    hid = np.maximum(pre, 0.0)
    out = np.einsum("oh,nhc->noc", params[f"{stat}.w2"], hid) + params[f"{stat}.b2"][None, :, None]
    return out, pre, hid


def san_predict(params: dict[str, np.ndarray], mu_x: np.ndarray, var_x: np.ndarray):
    """Predict output-patch statistics from input-patch statistics.

    Returns (mu_y, var_y, cache); the variance passes through softplus so it
    stays positive.
    """
    feats = np.concatenate([mu_x, var_x], axis=1)  # (N, 2*Lp, C)
    mu_out, mu_pre, mu_hid = _san_net(params, "mu", feats)
    var_raw, var_pre, var_hid = _san_net(params, "var", feats)
    var_out = softplus(var_raw)
    cache = (feats, mu_pre, mu_hid, var_pre, var_hid, var_raw)
    return mu_out, var_out, cache


def san_predict_vjp(params, cache, g_mu, g_var) -> dict[str, np.ndarray]:
    """Backprop stage-one cotangents to predictor parameter gradients."""
    feats, mu_pre, mu_hid, var_pre, var_hid, var_raw = cache
    g_var_raw = g_var / (1.0 + np.exp(-var_raw))  # d softplus = sigmoid
    grads: dict[str, np.ndarray] = {}
    for stat, pre, hid, g_out in (("mu", mu_pre, mu_hid, g_mu), ("var", var_pre, var_hid, g_var_raw)):
        grads[f"{stat}.w2"] = np.einsum("noc,nhc->oh", g_out, hid)
        grads[f"{stat}.b2"] = g_out.sum(axis=(0, 2))
        g_hid = np.einsum("oh,noc->nhc", params[f"{stat}.w2"], g_out)
        g_pre = g_hid * (pre > 0.0)
        grads[f"{stat}.w1"] = np.einsum("nhc,ndc->hd", g_pre, feats)
        grads[f"{stat}.b1"] = g_pre.sum(axis=(0, 2))
    return grads


def _expand_patches(stat: np.ndarray, patch: int) -> np.ndarray:
    return np.repeat(stat, patch, axis=1)


def san_normalize(x: np.ndarray, mu_x: np.ndarray, var_x: np.ndarray, patch: int) -> np.ndarray:
    scale = np.sqrt(var_x + PATCH_EPS)
    return (x - _expand_patches(mu_x, patch)) / _expand_patches(scale, patch)


def san_denormalize(y_norm: np.ndarray, mu_y: np.ndarray, var_y: np.ndarray, patch: int) -> np.ndarray:
    scale = np.sqrt(var_y + PATCH_EPS)
    return y_norm * _expand_patches(scale, patch) + _expand_patches(mu_y, patch)


def san_denorm_scale(var_y: np.ndarray, patch: int) -> np.ndarray:
    """Per-step multiplier the backbone output sees; needed for its VJP."""
    return _expand_patches(np.sqrt(var_y + PATCH_EPS), patch)


# ---------------------------------------------------------------------------
# top-k frequency decomposition (FAN)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FanConfig:
    topk: int = 4
    hidden1: int = 64
    hidden2: int = 128


def main_frequency_split(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Split (..., L, C) into (main, residual) by per-window top-k amplitude bins.

    Ties resolve to the lower bin index; main + residual == x exactly.
    """
    x = np.asarray(x, dtype=float)
    length = x.shape[-2]
    bins = n_bins(length)
    if not 1 <= k <= bins:
        raise ValueError(f"top-k must be in [1, {bins}], got {k}")
    real, imag = dft_forward(x, axis=-2)
    amp = amplitude(real, imag)
    order = np.argsort(-amp, axis=-2, kind="stable")
    mask = np.zeros_like(amp)
    np.put_along_axis(mask, order[..., :k, :], 1.0, axis=-2)
    main = dft_inverse(real * mask, imag * mask, length, axis=-2)
    return main, x - main


def fan_init(lookback: int, horizon: int, channels: int, cfg: FanConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Frequency-branch MLP (shared across channels) plus combination weights."""
    h1, h2 = cfg.hidden1, cfg.hidden2
    sizes = [(h1, lookback), (h2, h1 + lookback), (horizon, h2)]
    params: dict[str, np.ndarray] = {}
    for idx, (fan_out, fan_in) in enumerate(sizes, start=1):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"w{idx}"] = rng.uniform(-a, a, size=(fan_out, fan_in))
        params[f"b{idx}"] = np.zeros(fan_out)
    params["combine"] = np.ones((2, channels))
    return params


def fan_freq_forward(params: dict[str, np.ndarray], x_main: np.ndarray, x_raw: np.ndarray):
    """Forecast the main-frequency part from (filtered series, raw window)."""
    pre1 = np.einsum("hl,nlc->nhc", params["w1"], x_main) + params["b1"][None, :, None]
    hid1 = np.maximum(pre1, 0.0)
    cat = np.concatenate([hid1, x_raw], axis=1)
    pre2 = np.einsum("hd,ndc->nhc", params["w2"], cat) + params["b2"][None, :, None]
    hid2 = np.maximum(pre2, 0.0)
    out = np.einsum("oh,nhc->noc", params["w3"], hid2) + params["b3"][None, :, None]
    cache = (x_main, x_raw, pre1, cat, pre2, hid2)
    return out, cache


def fan_freq_vjp(params, cache, upstream):
    """Returns (param_grads, grad_x_main, grad_x_raw)."""
    x_main, x_raw, pre1, cat, pre2, hid2 = cache
    h1 = params["w1"].shape[0]
    grads: dict[str, np.ndarray] = {}
    grads["w3"] = np.einsum("noc,nhc->oh", upstream, hid2)
    grads["b3"] = upstream.sum(axis=(0, 2))
    g_hid2 = np.einsum("oh,noc->nhc", params["w3"], upstream)
    g_pre2 = g_hid2 * (pre2 > 0.0)
    grads["w2"] = np.einsum("nhc,ndc->hd", g_pre2, cat)
    grads["b2"] = g_pre2.sum(axis=(0, 2))
    g_cat = np.einsum("hd,nhc->ndc", params["w2"], g_pre2)
    g_hid1, g_raw = g_cat[:, :h1, :], g_cat[:, h1:, :]
    g_pre1 = g_hid1 * (pre1 > 0.0)
    grads["w1"] = np.einsum("nhc,nlc->hl", g_pre1, x_main)
    grads["b1"] = g_pre1.sum(axis=(0, 2))
    g_main = np.einsum("hl,nhc->nlc", params["w1"], g_pre1)
    return grads, g_main, g_raw


def fan_combine(params: dict[str, np.ndarray], y_residual: np.ndarray, y_main: np.ndarray) -> np.ndarray:
    w = params["combine"]
    return w[0] * y_residual + w[1] * y_main
