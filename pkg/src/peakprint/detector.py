"""Logistic-regression detector over artifact fingerprints.

The model is deliberately linear: a positive weight on a bin means "a peak
here suggests synthetic audio", so exported weights can be read directly
against predicted artifact frequencies.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import IncompatibleFingerprintError, InvalidInputError, InvalidParameterError
from .fingerprint import Fingerprint, FingerprintConfig, band_bins
from .synth import REAL_LABEL

MODEL_VERSION = 1
_P_MIN = np.finfo(np.float64).tiny
_P_MAX = np.nextafter(1.0, 0.0)


def is_synthetic(label: str) -> int:
    return int(label != REAL_LABEL)


@dataclass
class FingerprintDataset:
    """Fingerprint matrix with labels and the analysis settings that produced it."""

    features: np.ndarray
    labels: list[str]
    config: FingerprintConfig
    sample_rate: float
    paths: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        if len(self.labels) != self.features.shape[0]:
            raise InvalidInputError("one label per fingerprint row is required")
        if not self.paths:
            self.paths = [""] * len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def targets(self) -> np.ndarray:
        return np.array([is_synthetic(label) for label in self.labels], dtype=np.float64)

    @property
    def bin_frequencies(self) -> np.ndarray:
        bins = band_bins(self.config.frame_len, self.sample_rate,
                         self.config.band_low, self.config.band_high)
        return bins * (self.sample_rate / self.config.frame_len)

    def subset(self, index) -> "FingerprintDataset":
        index = np.asarray(index, dtype=int)
        return FingerprintDataset(
            self.features[index], [self.labels[i] for i in index], self.config,
            self.sample_rate, [self.paths[i] for i in index],
        )

    def split(self, test_fraction: float = 0.2, seed: int = 0):
        """Stratified (per label) shuffled train/test split."""
        if not 0 < test_fraction < 1:
            raise InvalidParameterError("test_fraction must be in (0, 1)")
        rng = np.random.default_rng(seed)
        train, test = [], []
        labels = np.array(self.labels)
        for label in sorted(set(self.labels)):
            idx = np.flatnonzero(labels == label)
            rng.shuffle(idx)
            n_test = int(round(test_fraction * idx.size))
            test.extend(idx[:n_test])
            train.extend(idx[n_test:])
        return self.subset(sorted(train)), self.subset(sorted(test))

    @classmethod
    def from_fingerprints(cls, fingerprints: Sequence[Fingerprint], labels: Sequence[str],
                          paths: Sequence[str] = ()) -> "FingerprintDataset":
        if not fingerprints:
            raise InvalidInputError("empty dataset")
        first = fingerprints[0]
        for fp in fingerprints:
            if fp.config != first.config or fp.source_rate != first.source_rate:
                raise IncompatibleFingerprintError("fingerprints use different settings")
        return cls(np.stack([fp.values for fp in fingerprints]), list(labels),
                   first.config, first.source_rate, list(paths))

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for row, label, src in zip(self.features, self.labels, self.paths):
                fh.write(json.dumps({
                    "path": src, "label": label, "sample_rate": self.sample_rate,
                    "values": row.tolist(), "config": self.config.to_dict(),
                }) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "FingerprintDataset":
        rows, labels, paths = [], [], []
        config = rate = None
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                record = json.loads(line)
                rec_config = FingerprintConfig.from_dict(record.get("config", {}))
                if config is None:
                    config, rate = rec_config, float(record["sample_rate"])
                elif rec_config != config or float(record["sample_rate"]) != rate:
                    raise IncompatibleFingerprintError(f"{path}:{lineno}: mixed fingerprint settings")
                rows.append(record["values"])
                labels.append(record["label"])
                paths.append(record.get("path", ""))
        if not rows:
            raise InvalidInputError(f"{path}: no fingerprints")
        if len({len(r) for r in rows}) != 1:
            raise InvalidInputError(f"{path}: fingerprints differ in length")
        return cls(np.array(rows), labels, config, rate, paths)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    max_epochs: int = 3000
    l2_lambda: float = 1e-3
    tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidParameterError("learning_rate must be > 0")
        if self.max_epochs < 1:
            raise InvalidParameterError("max_epochs must be >= 1")
        if self.l2_lambda < 0:
            raise InvalidParameterError("l2_lambda must be >= 0")
        if not self.tolerance > 0:
            raise InvalidParameterError("tolerance must be > 0")


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray
    config: FingerprintConfig
    sample_rate: float
    epochs: int = 0

    def __post_init__(self):
        for name in ("weights", "mean", "std"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if not (self.weights.shape == self.mean.shape == self.std.shape) or self.weights.ndim != 1:
            raise InvalidInputError("weights, mean and std must be 1-D and equally long")
        if np.any(self.std <= 0):
            raise InvalidInputError("normalization std entries must be > 0")

    @property
    def dimension(self) -> int:
        return self.weights.size

    @property
    def bin_frequencies(self) -> np.ndarray:
        bins = band_bins(self.config.frame_len, self.sample_rate,
                         self.config.band_low, self.config.band_high)
        return bins * (self.sample_rate / self.config.frame_len)

    def normalize(self, features) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if features.shape[1] != self.dimension:
            raise InvalidInputError(
                f"fingerprint has {features.shape[1]} bins, model expects {self.dimension}"
            )
        return (features - self.mean) / self.std

    def logits(self, features) -> np.ndarray:
        return self.normalize(features) @ self.weights + self.bias

    def probabilities(self, features) -> np.ndarray:
        """Sigmoid of the logits, clipped into the open interval (0, 1)."""
        return np.clip(expit(self.logits(features)), _P_MIN, _P_MAX)

    def with_weights(self, weights, bias: float | None = None) -> "LinearModel":
        return LinearModel(np.asarray(weights, dtype=np.float64),
                           self.bias if bias is None else bias,
                           self.mean, self.std, self.config, self.sample_rate, self.epochs)

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "config": self.config.to_dict(),
            "sample_rate": self.sample_rate,
            "normalization": {"mean": self.mean.tolist(), "std": self.std.tolist()},
            "weights": self.weights.tolist(),
            "bias": float(self.bias),
            "epochs": self.epochs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearModel":
        if data.get("version") != MODEL_VERSION:
            raise InvalidInputError(f"unsupported model version {data.get('version')!r}")
        return cls(
            np.array(data["weights"]), float(data["bias"]),
            np.array(data["normalization"]["mean"]), np.array(data["normalization"]["std"]),
            FingerprintConfig.from_dict(data["config"]), float(data["sample_rate"]),
            int(data.get("epochs", 0)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "LinearModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def zero_model(dimension: int, config: FingerprintConfig | None = None,
               sample_rate: float = 48000.0) -> LinearModel:
    return LinearModel(np.zeros(dimension), 0.0, np.zeros(dimension), np.ones(dimension),
                       config or FingerprintConfig(), sample_rate)


def _objective(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2_lambda: float):
    z = x @ w + b
    # log(1 + e^z) - y z, computed without overflow
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + l2_lambda * (w @ w))
    residual = (expit(z) - y) / y.size
    return loss, x.T @ residual + 2.0 * l2_lambda * w, float(residual.sum())


def loss_and_gradient(model: LinearModel, features, targets, l2_lambda: float = 0.0):
    """Mean binary cross-entropy plus ``l2_lambda * ||w||^2`` and its exact gradient.

    Returns ``(loss, grad_weights, grad_bias)``; gradients are with respect
    to the weights acting on standardized features.
    """
    x = model.normalize(features)
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != (x.shape[0],):
        raise InvalidInputError("need exactly one target per fingerprint")
    return _objective(x, y, model.weights, model.bias, l2_lambda)


def train(dataset: FingerprintDataset, tc: TrainConfig | None = None) -> LinearModel:
    """Full-batch gradient descent on standardized fingerprints.

    Standardization statistics come from ``dataset`` only.  Weights start as
    tiny seeded Gaussian noise.  Stops after ``max_epochs`` or once an epoch
    lowers the loss by less than ``tolerance``.
    """
    tc = tc or TrainConfig()
    if len(dataset) == 0:
        raise InvalidInputError("empty dataset")
    y = dataset.targets
    if y.min() == y.max():
        raise InvalidInputError("training data must contain both real and synthetic examples")
    mean = dataset.features.mean(axis=0)
    std = dataset.features.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    x = (dataset.features - mean) / std
    w = np.random.default_rng(tc.seed).normal(0.0, 1e-3, mean.size)
    b = 0.0
    previous = np.inf
    epoch = 0
    for epoch in range(1, tc.max_epochs + 1):
        loss, grad_w, grad_b = _objective(x, y, w, b, tc.l2_lambda)
        if previous - loss < tc.tolerance:
            break
        previous = loss
        w = w - tc.learning_rate * grad_w
        b = b - tc.learning_rate * grad_b
    return LinearModel(w, b, mean, std, dataset.config, dataset.sample_rate, epoch)


def check_compatible(model: LinearModel, fp: Fingerprint) -> None:
    if fp.config != model.config or fp.source_rate != model.sample_rate:
        raise IncompatibleFingerprintError(
            "fingerprint settings (frame, band, rate) differ from the model's"
        )
    if len(fp) != model.dimension:
        raise IncompatibleFingerprintError(
            f"fingerprint has {len(fp)} bins, model expects {model.dimension}"
        )


def predict(model: LinearModel, fp) -> float:
    """Probability that ``fp`` comes from a synthetic source."""
    if isinstance(fp, Fingerprint):
        check_compatible(model, fp)
        values = fp.values
    else:
        values = np.asarray(fp, dtype=np.float64)
        if values.shape != (model.dimension,):
            raise InvalidInputError(f"expected {model.dimension} values, got shape {values.shape}")
    return float(model.probabilities(values)[0])


@dataclass(frozen=True)
class EvalReport:
    per_class: dict[str, float]
    class_counts: dict[str, int]
    overall: float
    confusion: dict[str, int]
    threshold: float

    @property
    def total(self) -> int:
        return sum(self.confusion.values())

    def to_dict(self) -> dict:
        return {
            "per_class_accuracy": self.per_class,
            "class_counts": self.class_counts,
            "overall_accuracy": self.overall,
            "confusion": self.confusion,
            "threshold": self.threshold,
            "total": self.total,
        }

    def rows(self) -> list[tuple[str, int, float]]:
        """Table-style rows: real first, then synthetic classes alphabetically."""
        order = sorted(self.per_class, key=lambda k: (k != REAL_LABEL, k))
        return [(k, self.class_counts[k], self.per_class[k]) for k in order]


def evaluate(model: LinearModel, dataset: FingerprintDataset, threshold: float = 0.5) -> EvalReport:
    """Accuracy at ``threshold`` per label, overall, and the binary confusion counts."""
    if len(dataset) == 0:
        raise InvalidInputError("empty dataset")
    if dataset.config != model.config or dataset.sample_rate != model.sample_rate:
        raise IncompatibleFingerprintError("dataset fingerprints do not match the model")
    predicted = (model.probabilities(dataset.features) >= threshold).astype(int)
    truth = dataset.targets.astype(int)
    correct = predicted == truth
    labels = np.array(dataset.labels)
    per_class, counts = {}, {}
    for label in sorted(set(dataset.labels)):
        mask = labels == label
        per_class[label] = float(correct[mask].mean())
        counts[label] = int(mask.sum())
    confusion = {
        "tp": int(np.sum((predicted == 1) & (truth == 1))),
        "fp": int(np.sum((predicted == 1) & (truth == 0))),
        "tn": int(np.sum((predicted == 0) & (truth == 0))),
        "fn": int(np.sum((predicted == 0) & (truth == 1))),
    }
    return EvalReport(per_class, counts, float(correct.mean()), confusion, threshold)


def export_weights(model: LinearModel) -> str:
    """CSV text ``frequency_hz,weight``, one row per bin in frequency order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["frequency_hz", "weight"])
    for freq, weight in zip(model.bin_frequencies, model.weights):
        writer.writerow([repr(float(freq)), repr(float(weight))])
    return buf.getvalue()


def import_weights(model: LinearModel, text: str) -> LinearModel:
    """Replace the weights of ``model`` with those read from `export_weights` output."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["frequency_hz", "weight"]:
        raise InvalidInputError("weights CSV must start with a frequency_hz,weight header")
    body = rows[1:]
    if len(body) != model.dimension:
        raise InvalidInputError(f"weights CSV has {len(body)} rows, model has {model.dimension} bins")
    freqs = np.array([float(r[0]) for r in body])
    if not np.allclose(freqs, model.bin_frequencies, rtol=0, atol=1e-9):
        raise IncompatibleFingerprintError("weights CSV frequencies do not match the model bins")
    return model.with_weights(np.array([float(r[1]) for r in body]))
