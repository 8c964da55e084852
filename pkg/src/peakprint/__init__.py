"""Deconvolution peak artifacts: prediction, simulation, fingerprints and detection."""

__version__ = "0.1.0"

from .deconv import DeconvLayer, DeconvStack, PeakPrediction, measure_peaks, predict_peaks, run_stack
from .detector import FingerprintDataset, LinearModel, TrainConfig, evaluate, predict, train
from .dsp import Kernel, Signal, Spectrum, dft, idft
from .fingerprint import Fingerprint, FingerprintConfig, extract_fingerprint, match_architecture

__all__ = [
    "DeconvLayer", "DeconvStack", "PeakPrediction", "measure_peaks", "predict_peaks", "run_stack",
    "FingerprintDataset", "LinearModel", "TrainConfig", "evaluate", "predict", "train",
    "Kernel", "Signal", "Spectrum", "dft", "idft",
    "Fingerprint", "FingerprintConfig", "extract_fingerprint", "match_architecture",
]
