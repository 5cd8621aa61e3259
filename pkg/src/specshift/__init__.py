"""Frequency-stability re-weighting for time-series forecasting under shift."""

from .data import build_dataset, generate_synthetic, load_csv, shift_benchmark
from .models import Backbone, BackboneConfig
from .shiftmetrics import jsd2, ks, shift_report
from .spectral import dft_forward, dft_inverse
from .stationarity import amplitude_panel, scores
from .tifo import TifoConfig
from .training import PipelineConfig, TrainConfig, build_pipeline, evaluate, train

__all__ = [
    "Backbone",
    "BackboneConfig",
    "PipelineConfig",
    "TifoConfig",
    "TrainConfig",
    "amplitude_panel",
    "build_dataset",
    "build_pipeline",
    "dft_forward",
    "dft_inverse",
    "evaluate",
    "generate_synthetic",
    "jsd2",
    "ks",
    "load_csv",
    "scores",
    "shift_benchmark",
    "shift_report",
    "train",
]

__version__ = "0.1.0"
