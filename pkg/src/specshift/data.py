"""Dataset plumbing: CSV loading, windowing, chronological splits, z-scoring,
and a condition-based synthetic generator.

A raw series is a (T, C) float array, rows in time order.  Windowing is
stride-1: window i covers rows [i, i+L) with target rows [i+L, i+L+H).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

ZSCORE_EPS = 1e-8


def load_csv(path: str) -> np.ndarray:
    """Load a (T, C) series from a headered CSV.

    A leading non-numeric column (dates) is dropped; any other non-numeric
    entry, ragged row, or empty table raises DataError with the row index.
    """
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and at least one data row")
    header, data_rows = rows[0], rows[1:]
    width = len(header)
    skip_first = False
    try:
        float(data_rows[0][0])
    except (ValueError, IndexError):
        skip_first = True
    out = np.empty((len(data_rows), width - skip_first))
    for idx, row in enumerate(data_rows):
        if len(row) != width:
            raise DataError(f"{path}: row {idx + 1} has {len(row)} fields, expected {width}")
        for col, cell in enumerate(row[skip_first:]):
            try:
                out[idx, col] = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {idx + 1}, column {header[col + skip_first]!r}: not a number: {cell!r}") from None
    if not np.isfinite(out).all():
        bad = int(np.argwhere(~np.isfinite(out))[0][0])
        raise DataError(f"{path}: non-finite value in row {bad + 1}")
    return out


def make_windows(series: np.ndarray, lookback: int, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Stride-1 windowing into inputs (N, L, C) and targets (N, H, C)."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 2:
        raise DataError("series must be (T, C)")
    t = series.shape[0]
    n = t - lookback - horizon + 1
    if lookback < 1 or horizon < 1:
        raise DataError("lookback and horizon must be positive")
    if n < 1:
        raise DataError(f"series length {t} too short for lookback {lookback} + horizon {horizon}")
    idx = np.arange(n)
    x = np.stack([series[i : i + lookback] for i in idx])
    y = np.stack([series[i + lookback : i + lookback + horizon] for i in idx])
    return x, y


def chronological_split(n: int) -> tuple[slice, slice, slice]:
    """70/20/10 window split by position; needs at least 10 windows."""
    if n < 10:
        raise DataError(f"need at least 10 windows to split, got {n}")
    t = int(np.floor(0.7 * n))
    v = int(np.floor(0.9 * n))
    return slice(0, t), slice(t, v), slice(v, n)


@dataclass
class Scaler:
    mu: np.ndarray  # (C,)
    sigma: np.ndarray  # (C,)

    def apply(self, arr: np.ndarray) -> np.ndarray:
        return (arr - self.mu) / self.sigma


def fit_scaler(train_inputs: np.ndarray, eps: float = ZSCORE_EPS) -> Scaler:
    """Per-channel z-score statistics over the training windows' values."""
    vals = np.asarray(train_inputs, dtype=float)
    flat = vals.reshape(-1, vals.shape[-1])
    return Scaler(mu=flat.mean(axis=0), sigma=flat.std(axis=0) + eps)


@dataclass
class Dataset:
    """Windowed, split, z-scored forecasting dataset."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    scaler: Scaler

    @property
    def channels(self) -> int:
        return self.x_train.shape[-1]


def build_dataset(series: np.ndarray, lookback: int, horizon: int, scaler: Scaler | None = None) -> Dataset:
    """Window, split chronologically, and z-score with train-split statistics.

    A pre-fit scaler (e.g. from a checkpoint) can be supplied to reproduce
    the exact training-time normalization.
    """
    x, y = make_windows(series, lookback, horizon)
    tr, va, te = chronological_split(x.shape[0])
    if scaler is None:
        scaler = fit_scaler(x[tr])
    return Dataset(
        x_train=scaler.apply(x[tr]),
        y_train=scaler.apply(y[tr]),
        x_val=scaler.apply(x[va]),
        y_val=scaler.apply(y[va]),
        x_test=scaler.apply(x[te]),
        y_test=scaler.apply(y[te]),
        scaler=scaler,
    )


# ---------------------------------------------------------------------------
# synthetic conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    """One temporal regime: a frequency mixture plus optional noise override.

    components: (bin index, amplitude) pairs; bin indices are relative to the
    sample length (index f completes f cycles per sample).
    """

    components: tuple[tuple[int, float], ...]
    noise: float | None = None


@dataclass(frozen=True)
class SyntheticSpec:
    conditions: tuple[Condition, ...]
    samples_per_condition: int = 50
    sample_length: int = 96
    channels: int = 1
    noise: float = 0.1
    amp_jitter: float = 0.0  # per-sample relative amplitude jitter, 0 disables
    seed: int = 0

    def __post_init__(self):
        if not self.conditions:
            raise ValueError("need at least one condition")
        k = self.sample_length // 2 + 1
        for cond in self.conditions:
            for freq, _ in cond.components:
                if not 0 <= freq < k:
                    raise ValueError(f"component frequency {freq} out of range for {k} bins")


def generate_synthetic(spec: SyntheticSpec) -> list[np.ndarray]:
    """One (samples * sample_length, C) block per condition, deterministic in seed.

    Sample s of a condition is sum_j a_j * sin(2 pi f_j n / L + phi_j) plus
    Gaussian noise; the phase phi_j is drawn once per (condition, component,
    channel) so a condition's spectrum is stable across its samples.
    """
    rng = np.random.default_rng(spec.seed)
    length = spec.sample_length
    n = np.arange(length)
    blocks = []
    for cond in spec.conditions:
        sigma = spec.noise if cond.noise is None else cond.noise
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(len(cond.components), spec.channels))
        block = np.zeros((spec.samples_per_condition, length, spec.channels))
        for s in range(spec.samples_per_condition):
            for j, (freq, amp) in enumerate(cond.components):
                if spec.amp_jitter:
                    amp = amp * (1.0 + spec.amp_jitter * rng.uniform(-1.0, 1.0))
                # per-channel phase offsets on the same component
                for c in range(spec.channels):
                    block[s, :, c] += amp * np.sin((2.0 * np.pi * freq / length) * n + phases[j, c])
            block[s] += sigma * rng.standard_normal((length, spec.channels))
        blocks.append(block.reshape(-1, spec.channels))
    return blocks


def synthetic_series(spec: SyntheticSpec) -> np.ndarray:
    """Concatenate the condition blocks chronologically into one raw series."""
    return np.concatenate(generate_synthetic(spec), axis=0)


def condition_ranges(spec: SyntheticSpec) -> list[tuple[int, int]]:
    """Row ranges [start, stop) of each condition in the concatenated series."""
    block = spec.samples_per_condition * spec.sample_length
    return [(i * block, (i + 1) * block) for i in range(len(spec.conditions))]


def shift_benchmark(seed: int = 0) -> SyntheticSpec:
    """Preset used by the end-to-end acceptance experiment.

    Three training-region conditions dominated by stable low-frequency tones,
    then a final condition whose energy moves into a high-frequency band the
    training region only ever saw at noise level.
    """
    low = ((3, 1.0), (5, 0.6))
    high_bins = (17, 19, 21)
    conditions = tuple(Condition(components=low) for _ in range(3)) + (
        Condition(components=low + tuple((b, 2.0) for b in high_bins)),
    )
    return SyntheticSpec(
        conditions=conditions,
        samples_per_condition=50,
        sample_length=48,
        channels=1,
        noise=0.1,
        amp_jitter=0.25,
        seed=seed,
    )
