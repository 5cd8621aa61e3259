"""Forecasting backbones with explicit forward and VJP passes.

Both backbones are affine maps from a lookback window (L, C) to a forecast
(H, C).  The decomposition backbone first splits the input into a trend part
(centered moving average with edge replication) and a seasonal remainder,
then applies one affine head to each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_DECOMP: dict[tuple[int, int], np.ndarray] = {}


@dataclass(frozen=True)
class BackboneConfig:
    kind: str  # "linear" or "dlinear"
    lookback: int
    horizon: int
    channels: int
    shared: bool = False  # linear only: one weight matrix for every channel
    kernel: int = 25  # dlinear only: moving-average width, odd

    def __post_init__(self):
        if self.kind not in ("linear", "dlinear"):
            raise ValueError(f"unknown backbone kind: {self.kind!r}")
        if min(self.lookback, self.horizon, self.channels) < 1:
            raise ValueError("lookback, horizon and channels must be positive")
        if self.kind == "dlinear" and (self.kernel < 1 or self.kernel % 2 == 0):
            raise ValueError("moving-average kernel must be a positive odd integer")


def decompose_matrix(length: int, kernel: int) -> np.ndarray:
    """(L, L) matrix M with (M x)[n] the edge-replicated moving average of x."""
    key = (length, kernel)
    m = _DECOMP.get(key)
    if m is None:
        half = kernel // 2
        m = np.zeros((length, length))
        for n in range(length):
            for j in range(n - half, n + half + 1):
                m[n, min(max(j, 0), length - 1)] += 1.0 / kernel
        _DECOMP[key] = m
    return m


def moving_average_decompose(x: np.ndarray, kernel: int) -> tuple[np.ndarray, np.ndarray]:
    """Split (..., L, C) into (trend, seasonal) with trend + seasonal == x exactly."""
    x = np.asarray(x, dtype=float)
    m = decompose_matrix(x.shape[-2], kernel)
    trend = np.einsum("nl,...lc->...nc", m, x)
    return trend, x - trend


def _affine_init(cfg: BackboneConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    a = np.sqrt(6.0 / (cfg.lookback + cfg.horizon))
    if cfg.shared:
        weight = rng.uniform(-a, a, size=(cfg.horizon, cfg.lookback))
        bias = np.zeros(cfg.horizon)
    else:
        weight = rng.uniform(-a, a, size=(cfg.channels, cfg.horizon, cfg.lookback))
        bias = np.zeros((cfg.channels, cfg.horizon))
    return weight, bias


def _affine_forward(weight, bias, x, shared: bool) -> np.ndarray:
    if shared:
        return np.einsum("hl,nlc->nhc", weight, x) + bias[None, :, None]
    return np.einsum("chl,nlc->nhc", weight, x) + bias.T[None, :, :]


def _affine_vjp(weight, x, upstream, shared: bool):
    if shared:
        g_w = np.einsum("nhc,nlc->hl", upstream, x)
        g_b = upstream.sum(axis=(0, 2))
        g_x = np.einsum("hl,nhc->nlc", weight, upstream)
    else:
        g_w = np.einsum("nhc,nlc->chl", upstream, x)
        g_b = upstream.sum(axis=0).T
        g_x = np.einsum("chl,nhc->nlc", weight, upstream)
    return g_w, g_b, g_x


class Backbone:
    """Parameter container plus explicit forward/VJP for one backbone kind."""

    def __init__(self, cfg: BackboneConfig, rng: np.random.Generator):
        self.cfg = cfg
        if cfg.kind == "linear":
            w, b = _affine_init(cfg, rng)
            self.params = {"weight": w, "bias": b}
        else:
            wt, bt = _affine_init(cfg, rng)
            ws, bs = _affine_init(cfg, rng)
            self.params = {
                "trend.weight": wt,
                "trend.bias": bt,
                "seasonal.weight": ws,
                "seasonal.bias": bs,
            }

    def forward(self, x: np.ndarray) -> np.ndarray:
        """(N, L, C) -> (N, H, C)."""
        cfg = self.cfg
        if cfg.kind == "linear":
            return _affine_forward(self.params["weight"], self.params["bias"], x, cfg.shared)
        trend, seasonal = moving_average_decompose(x, cfg.kernel)
        out = _affine_forward(self.params["trend.weight"], self.params["trend.bias"], trend, cfg.shared)
        out += _affine_forward(self.params["seasonal.weight"], self.params["seasonal.bias"], seasonal, cfg.shared)
        return out

    def vjp(self, x: np.ndarray, upstream: np.ndarray):
        """Returns (param_grads, grad_x) for the forward pass at x."""
        cfg = self.cfg
        if cfg.kind == "linear":
            g_w, g_b, g_x = _affine_vjp(self.params["weight"], x, upstream, cfg.shared)
            return {"weight": g_w, "bias": g_b}, g_x
        trend, seasonal = moving_average_decompose(x, cfg.kernel)
        g_wt, g_bt, g_trend = _affine_vjp(self.params["trend.weight"], trend, upstream, cfg.shared)
        g_ws, g_bs, g_seasonal = _affine_vjp(self.params["seasonal.weight"], seasonal, upstream, cfg.shared)
        m = decompose_matrix(cfg.lookback, cfg.kernel)
        # x feeds trend through M and seasonal through (I - M)
        g_x = np.einsum("nl,...nc->...lc", m, g_trend - g_seasonal) + g_seasonal
        return {
            "trend.weight": g_wt,
            "trend.bias": g_bt,
            "seasonal.weight": g_ws,
            "seasonal.bias": g_bs,
        }, g_x
