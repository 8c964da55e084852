"""Artifact fingerprints: baseline-subtracted, band-limited average log spectra."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.ndimage import minimum_filter1d

from .deconv import measure_peaks, predict_peaks
from .dsp import DEFAULT_EPSILON, Signal, average_frame_spectrum, log_magnitude
from .errors import InsufficientDataError, InvalidInputError, InvalidParameterError


@dataclass(frozen=True)
class FingerprintConfig:
    frame_len: int = 8192
    band_low: float = 5000.0
    band_high: float = 16000.0
    min_window: int = 11
    epsilon: float = DEFAULT_EPSILON
    window: str = "rect"
    overlap: float = 0.0

    def __post_init__(self):
        if self.frame_len < 2 or self.frame_len & (self.frame_len - 1):
            raise InvalidParameterError(f"frame_len must be a power of two, got {self.frame_len}")
        if not 0 <= self.band_low < self.band_high:
            raise InvalidParameterError(
                f"need 0 <= band_low < band_high, got [{self.band_low}, {self.band_high}]"
            )
        if self.min_window < 3 or self.min_window % 2 == 0:
            raise InvalidParameterError(f"min_window must be odd and >= 3, got {self.min_window}")
        if self.epsilon <= 0:
            raise InvalidParameterError("epsilon must be > 0")

    @classmethod
    def for_rate(cls, sample_rate: float, **overrides) -> "FingerprintConfig":
        """Default bands: [5, 16] kHz for full-rate audio, [1, 8] kHz for 16 kHz audio."""
        if sample_rate <= 16000:
            overrides = {"band_low": 1000.0, "band_high": sample_rate / 2, **overrides}
        return cls(**overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FingerprintConfig":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


@dataclass(frozen=True, eq=False)
class Fingerprint:
    values: np.ndarray
    bin_frequencies: np.ndarray
    bin_indices: np.ndarray
    source_rate: float
    config: FingerprintConfig

    def __len__(self) -> int:
        return self.values.size

    def peak_bins(self, min_prominence: float | None = None) -> list[int]:
        """Global half-spectrum bin indices of the detected peaks."""
        local = measure_peaks(self.values, min_prominence)
        return [int(self.bin_indices[i]) for i in local]


class BandSelection(NamedTuple):
    values: np.ndarray
    frequencies: np.ndarray
    indices: np.ndarray


def local_min_subtract(logspec, window: int) -> np.ndarray:
    """Subtract the minimum over a centred sliding window (edges clamped)."""
    x = np.asarray(logspec, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError("expected a non-empty 1-D vector")
    if window < 3 or window % 2 == 0:
        raise InvalidParameterError(f"window must be odd and >= 3, got {window}")
    if window > x.size:
        raise InvalidParameterError(f"window {window} longer than vector ({x.size})")
    return x - minimum_filter1d(x, size=window, mode="nearest")


def band_bins(frame_len: int, sample_rate: float, band_low: float, band_high: float) -> np.ndarray:
    """Half-spectrum bins m with ``band_low <= m * rate / frame_len <= band_high``."""
    nyquist = sample_rate / 2
    if band_low < 0 or band_low >= band_high:
        raise InvalidParameterError(f"invalid band [{band_low}, {band_high}]")
    if band_high > nyquist:
        raise InvalidParameterError(f"band_high {band_high} Hz exceeds Nyquist {nyquist} Hz")
    m = np.arange(frame_len // 2 + 1)
    # Compare m * rate against f * frame_len to avoid dividing.
    inside = (m * sample_rate >= band_low * frame_len) & (m * sample_rate <= band_high * frame_len)
    bins = np.flatnonzero(inside)
    if bins.size == 0:
        raise InvalidParameterError(f"band [{band_low}, {band_high}] Hz selects no bins")
    return bins


def band_select(vector, sample_rate: float, band_low: float, band_high: float) -> BandSelection:
    """Keep the half-spectrum bins whose centre frequency lies in the band."""
    vector = np.asarray(vector, dtype=np.float64)
    frame_len = 2 * (vector.size - 1)
    bins = band_bins(frame_len, sample_rate, band_low, band_high)
    return BandSelection(vector[bins], bins * (sample_rate / frame_len), bins)


def extract_fingerprint(audio: Signal, config: FingerprintConfig | None = None) -> Fingerprint:
    """Average spectrum -> log -> local-minimum baseline removal -> band.

    The baseline removal makes the result invariant to gain (up to the epsilon
    floor) because a gain is a constant offset in the log domain.
    """
    config = config or FingerprintConfig()
    if config.band_high > audio.sample_rate / 2:
        raise InvalidParameterError(
            f"band_high {config.band_high} Hz exceeds Nyquist of {audio.sample_rate} Hz audio"
        )
    if len(audio) < config.frame_len:
        raise InsufficientDataError(
            f"audio has {len(audio)} samples, needs at least frame_len={config.frame_len}"
        )
    spectrum = average_frame_spectrum(
        audio, config.frame_len, window=config.window, overlap=config.overlap
    )
    baseline_free = local_min_subtract(log_magnitude(spectrum, config.epsilon), config.min_window)
    selection = band_select(baseline_free, audio.sample_rate, config.band_low, config.band_high)
    return Fingerprint(
        values=selection.values,
        bin_frequencies=selection.frequencies,
        bin_indices=selection.indices,
        source_rate=audio.sample_rate,
        config=config,
    )


def predicted_bins(strides: Sequence[int], frame_len: int, sample_rate: float,
                   band: tuple[float, float] | None = None) -> np.ndarray:
    """Nearest half-spectrum bins of the predicted peaks, optionally restricted to a band."""
    prediction = predict_peaks(strides, output_rate=sample_rate)
    freqs = np.array(prediction.absolute_frequencies)
    if band is not None:
        freqs = freqs[(freqs >= band[0]) & (freqs <= band[1])]
    return np.unique(np.rint(freqs * frame_len / sample_rate).astype(int))


def match_bins(reference, candidates, tolerance: int = 1) -> np.ndarray:
    """Boolean mask over ``reference``: True where some candidate lies within ``tolerance`` bins."""
    reference = np.asarray(reference, dtype=int)
    candidates = np.sort(np.asarray(candidates, dtype=int))
    if reference.size == 0 or candidates.size == 0:
        return np.zeros(reference.size, dtype=bool)
    pos = np.searchsorted(candidates, reference)
    left = candidates[np.clip(pos - 1, 0, candidates.size - 1)]
    right = candidates[np.clip(pos, 0, candidates.size - 1)]
    nearest = np.minimum(np.abs(reference - left), np.abs(reference - right))
    return nearest <= tolerance


def peak_jaccard(a, b, tolerance: int = 1) -> float:
    """Jaccard overlap of two peak-bin sets where peaks within ``tolerance`` bins match.

    Matching is one-to-one (greedy, ascending), so a single peak cannot
    absorb two neighbours.
    """
    a = sorted(int(i) for i in a)
    b = sorted(int(i) for i in b)
    if not a and not b:
        return 1.0
    used = set()
    matched = 0
    j0 = 0
    for i in a:
        while j0 < len(b) and b[j0] < i - tolerance:
            j0 += 1
        j = j0
        while j < len(b) and b[j] <= i + tolerance:
            if j not in used:
                used.add(j)
                matched += 1
                break
            j += 1
    return matched / (len(a) + len(b) - matched)


@dataclass(frozen=True)
class ArchitectureMatch:
    strides: tuple[int, ...]
    score: float
    recall: float
    precision: float
    predicted: int
    detected: int


def match_architecture(
    fp: Fingerprint,
    candidates: Sequence[Sequence[int]],
    *,
    tolerance: int = 1,
    min_prominence: float | None = None,
) -> list[ArchitectureMatch]:
    """Rank stride schedules by how well their predicted peaks explain the fingerprint.

    ``recall`` is the fraction of predicted in-band peaks found within
    ``tolerance`` bins of a detected peak; ``precision`` the fraction of
    detected peaks explained by a prediction.  The ranking ``score`` is
    their harmonic mean, because recall alone ties every schedule whose
    peak grid is a subset of the true one (e.g. [4, 4, 4] vs [8, 5, 4, 2]).
    Ties keep candidate order.
    """
    if not candidates:
        raise InvalidParameterError("need at least one candidate stride list")
    detected = np.array(fp.peak_bins(min_prominence), dtype=int)
    band = (float(fp.bin_frequencies[0]), float(fp.bin_frequencies[-1]))
    results = []
    for strides in candidates:
        predicted = predicted_bins(strides, fp.config.frame_len, fp.source_rate, band)
        recall = float(match_bins(predicted, detected, tolerance).mean()) if predicted.size else 0.0
        precision = float(match_bins(detected, predicted, tolerance).mean()) if detected.size else 0.0
        score = 0.0 if recall + precision == 0 else 2 * recall * precision / (recall + precision)
        results.append(ArchitectureMatch(tuple(int(k) for k in strides), score, recall,
                                         precision, int(predicted.size), int(detected.size)))
    order = sorted(range(len(results)), key=lambda i: (-results[i].score, i))
    return [results[i] for i in order]


def fingerprint_dimension(config: FingerprintConfig, sample_rate: float) -> int:
    return int(band_bins(config.frame_len, sample_rate, config.band_low, config.band_high).size)


