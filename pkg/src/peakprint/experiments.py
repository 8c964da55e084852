"""Desk-scale experiments: simulated stacks vs predicted peaks, and the detector."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .deconv import DeconvStack, measure_peaks, random_stack, run_stack
from .detector import (
    EvalReport,
    FingerprintDataset,
    LinearModel,
    TrainConfig,
    evaluate,
    train,
)
from .dsp import Signal
from .fingerprint import (
    Fingerprint,
    FingerprintConfig,
    extract_fingerprint,
    match_bins,
    peak_jaccard,
    predicted_bins,
)
from .synth import StackSpec, SynthSpec, synth_examples


def noise_latent(n: int, rate: float, seed, mean: float = 1.0, std: float = 0.25) -> Signal:
    """Gaussian latent with a dominant DC term (the component the stack replicates)."""
    rng = np.random.default_rng(seed)
    return Signal(mean + std * rng.standard_normal(n), rate)


def latent_length(total_stride: int, n_frames: int, frame_len: int) -> int:
    return math.ceil(n_frames * frame_len / total_stride)


def simulate(
    strides: Sequence[int],
    seed: int,
    *,
    output_rate: float = 48000.0,
    n_frames: int = 200,
    config: FingerprintConfig | None = None,
    stack: DeconvStack | None = None,
) -> tuple[Signal, Fingerprint]:
    """Push a noise latent through a random stack and fingerprint the output."""
    config = config or FingerprintConfig()
    total = math.prod(strides)
    latent_rate = output_rate / total
    stack = stack or random_stack(strides, seed=seed, input_rate=latent_rate)
    latent = noise_latent(latent_length(total, n_frames, config.frame_len), latent_rate, [seed, 1])
    out = run_stack(latent, stack)
    return out, extract_fingerprint(out, config)


def full_band(output_rate: float, **overrides) -> FingerprintConfig:
    return FingerprintConfig(band_low=0.0, band_high=output_rate / 2, **overrides)


def placement_recall(strides: Sequence[int], seed: int, *, output_rate: float = 48000.0,
                     n_frames: int = 200, tolerance: int = 1) -> float:
    """Fraction of predicted peaks (DC to Nyquist) found within ``tolerance`` bins."""
    config = full_band(output_rate)
    _, fp = simulate(strides, seed, output_rate=output_rate, n_frames=n_frames, config=config)
    detected = fp.bin_indices[measure_peaks(fp.values, mirror_edges=True)]
    predicted = predicted_bins(strides, config.frame_len, output_rate)
    return float(match_bins(predicted, detected, tolerance).mean())


def peak_overlap(strides_a: Sequence[int], seed_a: int, strides_b: Sequence[int], seed_b: int,
                 *, output_rate: float = 48000.0, n_frames: int = 200,
                 config: FingerprintConfig | None = None, tolerance: int = 1) -> float:
    """Jaccard overlap (with bin tolerance) of two simulated stacks' fingerprint peaks."""
    _, fa = simulate(strides_a, seed_a, output_rate=output_rate, n_frames=n_frames, config=config)
    _, fb = simulate(strides_b, seed_b, output_rate=output_rate, n_frames=n_frames, config=config)
    return peak_jaccard(fa.peak_bins(), fb.peak_bins(), tolerance)


def fingerprint_dataset(spec: SynthSpec, config: FingerprintConfig | None = None,
                        threads: int = 1) -> FingerprintDataset:
    config = config or FingerprintConfig.for_rate(spec.output_rate)
    fps, labels, names = [], [], []
    for example in synth_examples(spec, threads):
        fps.append(extract_fingerprint(example.signal, config))
        labels.append(example.label)
        names.append(f"{example.label}_{example.index:05d}")
    return FingerprintDataset.from_fingerprints(fps, labels, names)


@dataclass
class DetectionResult:
    model: LinearModel
    train_report: EvalReport
    test_report: EvalReport
    dataset: FingerprintDataset


def detection_experiment(
    dataset: FingerprintDataset,
    *,
    test_fraction: float = 0.2,
    split_seed: int = 0,
    tc: TrainConfig | None = None,
) -> DetectionResult:
    train_set, test_set = dataset.split(test_fraction, split_seed)
    model = train(train_set, tc)
    return DetectionResult(model, evaluate(model, train_set), evaluate(model, test_set), dataset)


def desk_scale_spec(n_per_class: int = 500, duration_s: float = 6.0, seed: int = 1,
                    strides: Sequence[int] = (8, 5, 4, 2)) -> SynthSpec:
    return SynthSpec(
        n_per_class=n_per_class,
        duration_s=duration_s,
        stacks=(StackSpec("encodec-like", tuple(strides), 7),),
        real_source="harmonic_mixture",
        seed=seed,
    )


def top_weight_peak_fraction(model: LinearModel, strides: Sequence[int], *,
                             decile: float = 0.1, tolerance: int = 1) -> float:
    """Share of the largest positive weights (top ``decile`` of them) sitting on predicted peaks."""
    frame_len = model.config.frame_len
    bins = np.rint(model.bin_frequencies * frame_len / model.sample_rate).astype(int)
    band = (model.config.band_low, model.config.band_high)
    predicted = predicted_bins(strides, frame_len, model.sample_rate, band)
    positive = np.flatnonzero(model.weights > 0)
    if positive.size == 0:
        return 0.0
    count = max(1, int(round(decile * positive.size)))
    top = positive[np.argsort(-model.weights[positive], kind="stable")[:count]]
    return float(match_bins(bins[top], predicted, tolerance).mean())


def null_model_accuracy(dataset: FingerprintDataset, *, n_permutations: int = 5, seed: int = 0,
                        test_fraction: float = 0.2, tc: TrainConfig | None = None) -> list[float]:
    """Held-out accuracy after training on shuffled labels, one value per permutation."""
    rng = np.random.default_rng(seed)
    accuracies = []
    for _ in range(n_permutations):
        labels = [dataset.labels[i] for i in rng.permutation(len(dataset))]
        shuffled = FingerprintDataset(dataset.features, labels, dataset.config,
                                      dataset.sample_rate, dataset.paths)
        result = detection_experiment(shuffled, test_fraction=test_fraction,
                                      split_seed=int(rng.integers(2**31)), tc=tc)
        accuracies.append(result.test_report.overall)
    return accuracies
