"""Training pipelines: method wrappers around a backbone, an Adam optimizer,
the early-stopping loop, evaluation, and a finite-difference gradient check.

Every pipeline computes gradients by composing explicit per-block VJPs; there
is no general-purpose tape.  A pipeline owns two tensor groups:

* ``params``  - trainable, updated by Adam, checkpointed
* ``frozen``  - fixed state (stability scores, pretrained patch predictor),
  checkpointed but never updated by the main loop
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import baselines, tifo
from .errors import CheckpointError, ConfigError, NumericError
from .models import Backbone, BackboneConfig
from .spectral import dft_forward, n_bins, window_taps
from .stationarity import amplitude_panel, ema_refresh, scores as stability_scores

METHODS = ("none", "revin", "san", "fan", "tifo", "tifo+san")


def _paired(pred, target) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return pred, target


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = _paired(pred, target)
    return float(np.mean((pred - target) ** 2))


def mae(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = _paired(pred, target)
    return float(np.mean(np.abs(pred - target)))


class Adam:
    """Adam with bias correction; a step with any non-finite gradient is rejected."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> bool:
        """Apply one update in place; returns False (no update) on non-finite grads."""
        for name in params:
            if not np.isfinite(grads[name]).all():
                return False
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return True


@dataclass(frozen=True)
class PipelineConfig:
    method: str
    backbone: BackboneConfig
    tifo: tifo.TifoConfig = field(default_factory=tifo.TifoConfig)
    san: baselines.SanConfig = field(default_factory=baselines.SanConfig)
    fan: baselines.FanConfig = field(default_factory=baselines.FanConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method: {self.method!r}")


def _namespace(prefix: str, tensors: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {f"{prefix}.{k}": v for k, v in tensors.items()}


class _Pipeline:
    """Shared plumbing: parameter registry, checkpoint tensors, loss helpers."""

    method = "none"
    transforms_input = False  # True when the backbone sees a reshaped series

    def __init__(self, cfg: PipelineConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.backbone = Backbone(cfg.backbone, rng)
        self.params: dict[str, np.ndarray] = _namespace("backbone", self.backbone.params)
        self.frozen: dict[str, np.ndarray] = {}

    # -- checkpoint support -------------------------------------------------

    def tensors(self) -> dict[str, np.ndarray]:
        out = dict(self.params)
        out.update(self.frozen)
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        own = self.tensors()
        missing = sorted(set(own) - set(tensors))
        if missing:
            raise CheckpointError(f"checkpoint lacks tensors: {', '.join(missing)}")
        for name, arr in own.items():
            incoming = tensors[name]
            if incoming.shape != arr.shape:
                raise CheckpointError(
                    f"tensor {name}: shape {incoming.shape} does not match expected {arr.shape}"
                )
            arr[...] = incoming

    # -- interface ----------------------------------------------------------

    def predict(self, x: np.ndarray, alpha: float | None = None,
                weights: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
        if alpha is not None or weights is not None:
            raise ConfigError(f"method {self.method!r} has no spectral weights to scale")
        return self._forward(x)

    def loss_grads(self, x: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        raise NotImplementedError

    def loss_value(self, x: np.ndarray, y: np.ndarray) -> float:
        return self.loss_grads(x, y)[0]

    def transformed_input(self, x: np.ndarray, alpha: float | None = None) -> np.ndarray:
        """The series the backbone consumes; identity unless a method reshapes it."""
        return np.asarray(x, dtype=float)

    def _forward(self, x):
        return self.backbone.forward(x)

    @staticmethod
    def _mse_upstream(pred, target):
        err = pred - target
        loss = float(np.mean(err * err))
        return loss, (2.0 / err.size) * err


class PlainPipeline(_Pipeline):
    method = "none"

    def loss_grads(self, x, y):
        pred = self.backbone.forward(x)
        loss, upstream = self._mse_upstream(pred, y)
        bb_grads, _ = self.backbone.vjp(x, upstream)
        return loss, _namespace("backbone", bb_grads)


class RevinPipeline(_Pipeline):
    method = "revin"
    transforms_input = True

    def __init__(self, cfg, rng):
        super().__init__(cfg, rng)
        self.params.update(_namespace("revin", baselines.revin_init(cfg.backbone.channels)))

    def _forward(self, x):
        mu, sigma = baselines.revin_stats(x)
        x_norm = baselines.revin_normalize(x, mu, sigma)
        y_norm = self.backbone.forward(x_norm)
        return baselines.revin_denormalize(
            y_norm, mu, sigma, self.params["revin.gamma"], self.params["revin.beta"]
        )

    def transformed_input(self, x, alpha=None):
        x = np.asarray(x, dtype=float)
        mu, sigma = baselines.revin_stats(x)
        return baselines.revin_normalize(x, mu, sigma)

    def loss_grads(self, x, y):
        mu, sigma = baselines.revin_stats(x)
        x_norm = baselines.revin_normalize(x, mu, sigma)
        y_norm = self.backbone.forward(x_norm)
        gamma = self.params["revin.gamma"]
        pred = baselines.revin_denormalize(y_norm, mu, sigma, gamma, self.params["revin.beta"])
        loss, upstream = self._mse_upstream(pred, y)
        g_gamma, g_beta = baselines.revin_denorm_vjp(upstream, y_norm, mu, sigma)
        bb_grads, _ = self.backbone.vjp(x_norm, upstream * gamma * sigma)
        grads = _namespace("backbone", bb_grads)
        grads["revin.gamma"] = g_gamma
        grads["revin.beta"] = g_beta
        return loss, grads


class SanPipeline(_Pipeline):
    """Patch-statistic normalization; the predictor trains in a first stage and
    stays frozen while the backbone trains."""

    method = "san"
    transforms_input = True

    def __init__(self, cfg, rng):
        super().__init__(cfg, rng)
        bc = cfg.backbone
        san = cfg.san
        if bc.lookback % san.patch or bc.horizon % san.patch:
            raise ConfigError("lookback and horizon must be divisible by san patch length")
        nets = baselines.san_init(bc.lookback, bc.horizon, san.patch, san.hidden, rng)
        self.frozen.update(_namespace("san", nets))

    def _san_params(self):
        return {k.split(".", 1)[1]: v for k, v in self.frozen.items() if k.startswith("san.")}

    def _normalize(self, x):
        patch = self.cfg.san.patch
        mu_x, var_x = baselines.san_patch_stats(x, patch)
        x_norm = baselines.san_normalize(x, mu_x, var_x, patch)
        mu_y, var_y, _ = baselines.san_predict(self._san_params(), mu_x, var_x)
        return x_norm, mu_y, var_y

    def transformed_input(self, x, alpha=None):
        return self._normalize(np.asarray(x, dtype=float))[0]

    def _forward(self, x):
        patch = self.cfg.san.patch
        x_norm, mu_y, var_y = self._normalize(x)
        y_norm = self.backbone.forward(x_norm)
        return baselines.san_denormalize(y_norm, mu_y, var_y, patch)

    def loss_grads(self, x, y):
        patch = self.cfg.san.patch
        x_norm, mu_y, var_y = self._normalize(x)
        y_norm = self.backbone.forward(x_norm)
        pred = baselines.san_denormalize(y_norm, mu_y, var_y, patch)
        loss, upstream = self._mse_upstream(pred, y)
        scale = baselines.san_denorm_scale(var_y, patch)
        bb_grads, _ = self.backbone.vjp(x_norm, upstream * scale)
        return loss, _namespace("backbone", bb_grads)


class FanPipeline(_Pipeline):
    """Top-k frequency decomposition with a frequency MLP branch; the training
    loss supervises the main and residual forecasts separately."""

    method = "fan"
    transforms_input = True

    def __init__(self, cfg, rng):
        super().__init__(cfg, rng)
        bc = cfg.backbone
        k_in, k_out = n_bins(bc.lookback), n_bins(bc.horizon)
        if not 1 <= cfg.fan.topk <= min(k_in, k_out):
            raise ConfigError(
                f"fan top-k must be in [1, {min(k_in, k_out)}] for this lookback/horizon"
            )
        nets = baselines.fan_init(bc.lookback, bc.horizon, bc.channels, cfg.fan, rng)
        self.params.update(_namespace("fan", nets))

    def _fan_params(self):
        return {k.split(".", 1)[1]: v for k, v in self.params.items() if k.startswith("fan.")}

    def transformed_input(self, x, alpha=None):
        _, residual = baselines.main_frequency_split(np.asarray(x, dtype=float), self.cfg.fan.topk)
        return residual

    def _forward(self, x):
        k = self.cfg.fan.topk
        x_main, x_res = baselines.main_frequency_split(x, k)
        y_main, _ = baselines.fan_freq_forward(self._fan_params(), x_main, x)
        y_res = self.backbone.forward(x_res)
        return baselines.fan_combine(self._fan_params(), y_res, y_main)

    def loss_grads(self, x, y):
        k = self.cfg.fan.topk
        fan_params = self._fan_params()
        x_main, x_res = baselines.main_frequency_split(x, k)
        t_main, t_res = baselines.main_frequency_split(y, k)
        pred_main, cache = baselines.fan_freq_forward(fan_params, x_main, x)
        pred_res = self.backbone.forward(x_res)
        loss_main, up_main = self._mse_upstream(pred_main, t_main)
        loss_res, up_res = self._mse_upstream(pred_res, t_res)
        fan_grads, _, _ = baselines.fan_freq_vjp(fan_params, cache, up_main)
        fan_grads["combine"] = np.zeros_like(fan_params["combine"])
        bb_grads, _ = self.backbone.vjp(x_res, up_res)
        grads = _namespace("backbone", bb_grads)
        grads.update(_namespace("fan", fan_grads))
        return loss_main + loss_res, grads


class TifoPipeline(_Pipeline):
    """Stability-score-driven spectral re-weighting ahead of the backbone."""

    method = "tifo"
    transforms_input = True

    def __init__(self, cfg, rng, score_table: np.ndarray | None = None):
        super().__init__(cfg, rng)
        bc = cfg.backbone
        bins = n_bins(bc.lookback)
        if cfg.tifo.keep is not None:
            tifo.expected_bins(bc.lookback, cfg.tifo.keep)
        self.params.update(_namespace("tifo", tifo.init_params(bins, cfg.tifo.hidden, rng)))
        if score_table is None:
            score_table = np.zeros((bins, bc.channels))
        if score_table.shape != (bins, bc.channels):
            raise ConfigError(f"score table must be ({bins}, {bc.channels})")
        self.frozen["tifo.scores"] = np.asarray(score_table, dtype=float)

    @property
    def scores(self) -> np.ndarray:
        return self.frozen["tifo.scores"]

    def _tifo_params(self):
        return {k.split(".", 1)[1]: v for k, v in self.params.items() if k.startswith("tifo.")}

    def tifo_input(self, x: np.ndarray) -> np.ndarray:
        """What the re-weighting layer consumes (identity here)."""
        return np.asarray(x, dtype=float)

    def _effective_weights(self, alpha: float | None, score_table: np.ndarray | None = None):
        table = self.scores if score_table is None else score_table
        lam_r, lam_i, cache = tifo.weights_forward(self._tifo_params(), table)
        a = self.cfg.tifo.alpha if alpha is None else alpha
        return tifo.alpha_scale(lam_r, a), tifo.alpha_scale(lam_i, a), cache, a

    def _head(self, x_t):
        """Backbone application after the spectral re-weighting."""
        return self.backbone.forward(x_t)

    def _head_vjp(self, x_t, upstream):
        bb_grads, g_xt = self.backbone.vjp(x_t, upstream)
        return _namespace("backbone", bb_grads), g_xt

    def predict(self, x, alpha=None, weights=None):
        x = self.tifo_input(x)
        if weights is None:
            lam_r, lam_i, _, _ = self._effective_weights(alpha)
        else:
            lam_r, lam_i = weights
        x_t = tifo.transform(x, lam_r, lam_i, self.cfg.tifo.keep)
        return self._post(self._head(x_t))

    def transformed_input(self, x, alpha=None):
        x = self.tifo_input(x)
        lam_r, lam_i, _, _ = self._effective_weights(alpha)
        return tifo.transform(x, lam_r, lam_i, self.cfg.tifo.keep)

    def _post(self, y_head):
        return y_head

    def loss_grads(self, x, y):
        keep = self.cfg.tifo.keep
        length = self.cfg.backbone.lookback
        x_in = self.tifo_input(np.asarray(x, dtype=float))
        lam_r, lam_i, cache, a = self._effective_weights(None)
        real, imag = dft_forward(x_in, axis=-2)
        x_t = tifo.weighted_inverse(real, imag, lam_r, lam_i, length, keep)
        pred = self._post(self._head(x_t))
        loss, upstream = self._mse_upstream(pred, y)
        upstream = self._post_vjp(upstream)
        grads, g_xt = self._head_vjp(x_t, upstream)
        _, g_lam_r, g_lam_i = tifo.transform_vjp(g_xt, real, imag, lam_r, lam_i, length, keep)
        # alpha scaling is affine in the raw weights
        tif_grads = tifo.weights_vjp(self._tifo_params(), cache, a * g_lam_r, a * g_lam_i)
        grads.update(_namespace("tifo", tif_grads))
        return loss, grads

    def _post_vjp(self, upstream):
        return upstream


class TifoSanPipeline(TifoPipeline):
    """Composition: patch normalization outside, spectral re-weighting inside."""

    method = "tifo+san"

    def __init__(self, cfg, rng, score_table=None):
        bc = cfg.backbone
        if bc.lookback % cfg.san.patch or bc.horizon % cfg.san.patch:
            raise ConfigError("lookback and horizon must be divisible by san patch length")
        super().__init__(cfg, rng, score_table)
        nets = baselines.san_init(bc.lookback, bc.horizon, cfg.san.patch, cfg.san.hidden, rng)
        self.frozen.update(_namespace("san", nets))
        self._denorm_state = None

    def _san_params(self):
        return {k.split(".", 1)[1]: v for k, v in self.frozen.items() if k.startswith("san.")}

    def tifo_input(self, x):
        patch = self.cfg.san.patch
        x = np.asarray(x, dtype=float)
        mu_x, var_x = baselines.san_patch_stats(x, patch)
        mu_y, var_y, _ = baselines.san_predict(self._san_params(), mu_x, var_x)
        self._denorm_state = (mu_y, var_y)
        return baselines.san_normalize(x, mu_x, var_x, patch)

    def _post(self, y_head):
        mu_y, var_y = self._denorm_state
        return baselines.san_denormalize(y_head, mu_y, var_y, self.cfg.san.patch)

    def _post_vjp(self, upstream):
        _, var_y = self._denorm_state
        return upstream * baselines.san_denorm_scale(var_y, self.cfg.san.patch)


def fit_score_table(
    pipeline: _Pipeline,
    x_train: np.ndarray,
    y_train: np.ndarray,
) -> np.ndarray:
    """Stability scores over the training windows as the re-weighting layer sees them."""
    tcfg = pipeline.cfg.tifo
    base = pipeline.tifo_input(x_train)
    taps = None
    if tcfg.window != "rectangular":
        taps = window_taps(tcfg.window, base.shape[-2])
    panel = amplitude_panel(base, taps)
    return stability_scores(panel, tcfg.score_metric, targets=y_train, eps=tcfg.score_eps)


def build_pipeline(
    cfg: PipelineConfig,
    rng: np.random.Generator,
    x_train: np.ndarray | None = None,
    y_train: np.ndarray | None = None,
) -> _Pipeline:
    """Construct a pipeline; the backbone always consumes the rng stream first.

    For the score-driven methods the stability table is fitted from the given
    training windows; pass None when tensors will be loaded from a checkpoint.
    """
    cls = {
        "none": PlainPipeline,
        "revin": RevinPipeline,
        "san": SanPipeline,
        "fan": FanPipeline,
        "tifo": TifoPipeline,
        "tifo+san": TifoSanPipeline,
    }[cfg.method]
    if cfg.method in ("tifo", "tifo+san"):
        pipeline = cls(cfg, rng)
        if x_train is not None:
            pipeline.frozen["tifo.scores"][...] = fit_score_table(pipeline, x_train, y_train)
        return pipeline
    return cls(cfg, rng)


# ---------------------------------------------------------------------------
# loops
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch: int = 32
    max_epochs: int = 30
    patience: int = 5

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.batch < 1:
            raise ConfigError("batch size must be at least 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be at least 1")
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")


@dataclass
class TrainResult:
    history: list[dict]
    best_epoch: int
    best_val_mse: float
    epochs_run: int


def train_san_predictor(
    pipeline: _Pipeline,
    x_train: np.ndarray,
    y_train: np.ndarray,
    batch: int,
    rng: np.random.Generator,
) -> None:
    """Stage one: fit the frozen patch-statistic predictor on train windows.

    Mean and variance targets are weighted equally.  The predictor tensors
    live in ``pipeline.frozen`` and stay fixed afterwards.
    """
    san_cfg = pipeline.cfg.san
    patch = san_cfg.patch
    params = {k.split(".", 1)[1]: v for k, v in pipeline.frozen.items() if k.startswith("san.")}
    mu_x, var_x = baselines.san_patch_stats(x_train, patch)
    mu_y, var_y = baselines.san_patch_stats(y_train, patch)
    adam = Adam(params, lr=san_cfg.lr)
    n = x_train.shape[0]
    for _ in range(san_cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch):
            sel = perm[start : start + batch]
            mu_hat, var_hat, cache = baselines.san_predict(params, mu_x[sel], var_x[sel])
            g_mu = (2.0 / mu_hat.size) * (mu_hat - mu_y[sel])
            g_var = (2.0 / var_hat.size) * (var_hat - var_y[sel])
            grads = baselines.san_predict_vjp(params, cache, g_mu, g_var)
            adam.step(params, grads)


def evaluate(
    pipeline: _Pipeline,
    x: np.ndarray,
    y: np.ndarray,
    batch: int = 256,
    alpha: float | None = None,
    ema_decay: float | None = None,
) -> dict[str, float]:
    """Mean MSE/MAE over a split, in fixed batch order.

    alpha rescales the spectral weights toward identity (score-driven methods
    only).  ema_decay, if set, refreshes the stability scores from each batch
    before weighting; the pipeline's stored scores are not modified.
    """
    is_tifo = isinstance(pipeline, TifoPipeline)
    if (alpha is not None or ema_decay is not None) and not is_tifo:
        raise ConfigError(f"method {pipeline.method!r} accepts neither alpha nor ema_decay")
    running_scores = None
    taps = None
    if ema_decay is not None:
        tcfg = pipeline.cfg.tifo
        running_scores = pipeline.scores.copy()
        if tcfg.window != "rectangular":
            taps = window_taps(tcfg.window, pipeline.cfg.backbone.lookback)
    sq_sum = 0.0
    abs_sum = 0.0
    count = 0
    for start in range(0, x.shape[0], batch):
        xb = x[start : start + batch]
        yb = y[start : start + batch]
        if running_scores is not None:
            tcfg = pipeline.cfg.tifo
            base = pipeline.tifo_input(xb)
            panel = amplitude_panel(base, taps)
            batch_scores = stability_scores(panel, tcfg.score_metric, targets=yb, eps=tcfg.score_eps)
            running_scores = ema_refresh(running_scores, batch_scores, ema_decay)
            lam_r, lam_i, _, _ = pipeline._effective_weights(alpha, running_scores)
            pred = pipeline.predict(xb, weights=(lam_r, lam_i))
        else:
            pred = pipeline.predict(xb, alpha=alpha)
        err = pred - yb
        sq_sum += float((err * err).sum())
        abs_sum += float(np.abs(err).sum())
        count += err.size
    return {"mse": sq_sum / count, "mae": abs_sum / count}


def train(
    pipeline: _Pipeline,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> TrainResult:
    """Mini-batch Adam with early stopping on validation MSE.

    History row 0 records the untouched initial state (train_mse is NaN
    there); rows 1..E are full epochs.  The best-validation parameters are
    restored before returning.  A non-finite training loss aborts with
    NumericError; non-finite gradients reject the single step and are counted
    in the epoch's ``rejected`` column.
    """
    if pipeline.method in ("san", "tifo+san"):
        train_san_predictor(pipeline, x_train, y_train, cfg.batch, rng)
    adam = Adam(pipeline.params, lr=cfg.lr)
    n = x_train.shape[0]
    init_val = evaluate(pipeline, x_val, y_val)
    history = [
        {
            "epoch": 0,
            "train_mse": float("nan"),
            "val_mse": init_val["mse"],
            "val_mae": init_val["mae"],
            "rejected": 0,
        }
    ]
    # Best tracking starts at +inf so the first trained epoch always counts
    # as an improvement; the init row is diagnostic, not a baseline.
    best_val = float("inf")
    best_epoch = 0
    best_state = {k: v.copy() for k, v in pipeline.params.items()}
    bad_epochs = 0
    epochs_run = 0
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        rejected = 0
        for start in range(0, n, cfg.batch):
            sel = perm[start : start + cfg.batch]
            loss, grads = pipeline.loss_grads(x_train[sel], y_train[sel])
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, batch {start // cfg.batch}"
                )
            if not adam.step(pipeline.params, grads):
                rejected += 1
            loss_sum += loss * sel.size
        val = evaluate(pipeline, x_val, y_val)
        history.append(
            {
                "epoch": epoch,
                "train_mse": loss_sum / n,
                "val_mse": val["mse"],
                "val_mae": val["mae"],
                "rejected": rejected,
            }
        )
        epochs_run = epoch
        if val["mse"] < best_val:
            best_val = val["mse"]
            best_epoch = epoch
            best_state = {k: v.copy() for k, v in pipeline.params.items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    for name, arr in pipeline.params.items():
        arr[...] = best_state[name]
    return TrainResult(
        history=history,
        best_epoch=best_epoch,
        best_val_mse=best_val if epochs_run else init_val["mse"],
        epochs_run=epochs_run,
    )


def finite_diff_check(pipeline: _Pipeline, x: np.ndarray, y: np.ndarray, eps: float = 1e-5) -> float:
    """Worst relative disagreement between analytic and central-difference grads.

    The denominator is floored at 1e-3 so exactly-zero analytic gradients are
    compared absolutely at that scale rather than against roundoff noise.
    """
    _, grads = pipeline.loss_grads(x, y)
    worst = 0.0
    for name in sorted(pipeline.params):
        arr = pipeline.params[name]
        g = np.asarray(grads[name], dtype=float).ravel()
        flat = arr.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = pipeline.loss_value(x, y)
            flat[i] = orig - eps
            down = pipeline.loss_value(x, y)
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(numeric), abs(g[i]), 1e-3)
            worst = max(worst, abs(numeric - g[i]) / denom)
    return worst
