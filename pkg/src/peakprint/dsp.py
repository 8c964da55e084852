"""Discrete signal and spectral primitives.

Everything here is a pure function of immutable values.  Boundary handling is
circular unless stated otherwise, so frequency-domain identities such as the
convolution theorem hold exactly (to rounding) rather than approximately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidInputError, InvalidParameterError

DEFAULT_EPSILON = 1e-10

# Above this many taps circular convolution goes through the FFT.
_DIRECT_CONV_MAX_TAPS = 64


def _frozen(array, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Signal:
    """Real mono waveform sampled at ``sample_rate`` Hz."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise InvalidInputError(f"samples must be 1-D, got shape {samples.shape}")
        if samples.size == 0:
            raise InvalidInputError("signal must contain at least one sample")
        if np.iscomplexobj(samples):
            raise InvalidInputError("signal samples must be real")
        samples = _frozen(samples, np.float64)
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("signal contains NaN or Inf")
        if not (np.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise InvalidParameterError(f"sample_rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def scaled(self, gain: float) -> "Signal":
        return Signal(self.samples * gain, self.sample_rate)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Full complex DFT of a length-``origin_length`` signal."""

    bins: np.ndarray
    bin_resolution: float
    origin_length: int

    def __post_init__(self):
        bins = _frozen(self.bins, np.complex128)
        if bins.ndim != 1 or bins.size == 0:
            raise InvalidInputError("spectrum bins must be a non-empty 1-D array")
        if bins.size != self.origin_length:
            raise InvalidInputError(
                f"bins length {bins.size} does not match origin_length {self.origin_length}"
            )
        object.__setattr__(self, "bins", bins)

    @property
    def sample_rate(self) -> float:
        return self.bin_resolution * self.origin_length

    def is_hermitian(self, atol: float = 1e-9) -> bool:
        """True when the spectrum is that of a real signal."""
        mirrored = np.conj(np.roll(self.bins[::-1], 1))
        scale = max(1.0, float(np.max(np.abs(self.bins))))
        return bool(np.max(np.abs(self.bins - mirrored)) <= atol * scale)


@dataclass(frozen=True, eq=False)
class Kernel:
    taps: np.ndarray

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps))
        if taps.ndim != 1 or taps.size == 0:
            raise InvalidInputError("kernel needs at least one tap")
        taps = _frozen(taps, np.float64)
        if not np.all(np.isfinite(taps)):
            raise InvalidInputError("kernel taps must be finite")
        object.__setattr__(self, "taps", taps)

    def __len__(self) -> int:
        return self.taps.size


def as_kernel(kernel) -> Kernel:
    return kernel if isinstance(kernel, Kernel) else Kernel(kernel)


def dft(signal: Signal) -> Spectrum:
    """Forward DFT, ``X[m] = sum_n s[n] exp(-2i pi m n / N)``, any length N."""
    if not isinstance(signal, Signal):
        signal = Signal(signal, 1.0)
    n = len(signal)
    return Spectrum(np.fft.fft(signal.samples), signal.sample_rate / n, n)


def idft(spectrum: Spectrum, *, real_tol: float = 1e-9) -> Signal:
    """Inverse DFT.

    The imaginary part is dropped; ``InvalidInputError`` is raised when it is
    not negligible, since a `Signal` is real.
    """
    values = np.fft.ifft(spectrum.bins)
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.max(np.abs(values.imag)) > real_tol * scale:
        raise InvalidInputError("spectrum is not conjugate-symmetric; inverse is complex")
    return Signal(values.real, spectrum.sample_rate)


def _check_factor(k) -> int:
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise InvalidParameterError(f"upsampling factor must be an integer >= 1, got {k!r}")
    return int(k)


def zero_insert(samples: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros(samples.size * k)
    out[::k] = samples
    return out


def zero_insert_upsample(signal: Signal, k: int) -> Signal:
    """Insert ``k - 1`` zeros after every sample; the rate goes up by ``k``."""
    k = _check_factor(k)
    return Signal(zero_insert(signal.samples, k), signal.sample_rate * k)


def triangular_kernel(k: int) -> np.ndarray:
    """``2k - 1`` taps of a unit-height triangle, e.g. ``[0.5, 1, 0.5]`` for k=2."""
    k = _check_factor(k)
    offsets = np.arange(-(k - 1), k)
    return 1.0 - np.abs(offsets) / k


def circular_convolve(x: np.ndarray, taps: np.ndarray, shift: int = 0) -> np.ndarray:
    """``y[n] = sum_t taps[t] * x[(n - t + shift) mod N]``."""
    n = x.size
    if taps.size <= _DIRECT_CONV_MAX_TAPS:
        y = np.zeros(n)
        for t, tap in enumerate(taps):
            if tap != 0.0:
                y += tap * np.roll(x, t - shift)
        return y
    folded = np.zeros(n)
    np.add.at(folded, (np.arange(taps.size) - shift) % n, taps)
    return np.fft.irfft(np.fft.rfft(x) * np.fft.rfft(folded), n)


def linear_interp_upsample(signal: Signal, k: int) -> Signal:
    """Linear interpolation by ``k`` with circular extension at the end.

    Computed as zero insertion followed by a centred triangular filter, so
    ``out[k*i] == in[i]`` and the last segment ramps back to ``in[0]``.
    """
    k = _check_factor(k)
    if k == 1:
        return Signal(signal.samples, signal.sample_rate)
    upsampled = zero_insert(signal.samples, k)
    out = circular_convolve(upsampled, triangular_kernel(k), shift=k - 1)
    return Signal(out, signal.sample_rate * k)


def convolve(signal: Signal, kernel, mode: str = "circular") -> Signal:
    """Discrete convolution of a signal with a kernel.

    ``full`` returns ``N + L - 1`` samples, ``same`` the centred ``N`` of them
    (numpy convention) and ``circular`` wraps the kernel around ``N``.
    """
    taps = as_kernel(kernel).taps
    x = signal.samples
    if mode == "full":
        out = np.convolve(x, taps, mode="full")
    elif mode == "same":
        full = np.convolve(x, taps, mode="full")
        start = (taps.size - 1) // 2
        out = full[start:start + x.size]
    elif mode == "circular":
        out = circular_convolve(x, taps)
    else:
        raise InvalidParameterError(f"unknown convolution mode {mode!r}")
    return Signal(out, signal.sample_rate)


def frame_matrix(samples: np.ndarray, frame_len: int, overlap: float = 0.0) -> np.ndarray:
    """Stack frames of ``frame_len`` samples as rows; a trailing partial frame is dropped."""
    if frame_len < 1:
        raise InvalidParameterError(f"frame_len must be >= 1, got {frame_len}")
    if not 0.0 <= overlap < 1.0:
        raise InvalidParameterError(f"overlap must be in [0, 1), got {overlap}")
    if samples.size < frame_len:
        raise InsufficientDataError(
            f"signal has {samples.size} samples, fewer than one frame of {frame_len}"
        )
    hop = max(1, int(round(frame_len * (1.0 - overlap))))
    if hop == frame_len:
        count = samples.size // frame_len
        return samples[:count * frame_len].reshape(count, frame_len)
    count = 1 + (samples.size - frame_len) // hop
    view = np.lib.stride_tricks.sliding_window_view(samples, frame_len)
    return view[::hop][:count]


def average_frame_spectrum(
    signal: Signal,
    frame_len: int,
    *,
    window: str = "rect",
    overlap: float = 0.0,
) -> np.ndarray:
    """Mean magnitude half-spectrum over successive frames.

    Returns ``frame_len // 2 + 1`` non-negative values.  No taper is applied
    unless ``window="hann"``.
    """
    frames = frame_matrix(signal.samples, frame_len, overlap)
    if window == "hann":
        frames = frames * np.hanning(frame_len + 1)[:-1]
    elif window != "rect":
        raise InvalidParameterError(f"unknown window {window!r}")
    return np.abs(np.fft.rfft(frames, axis=1)).mean(axis=0)


def half_spectrum_frequencies(frame_len: int, sample_rate: float) -> np.ndarray:
    return np.arange(frame_len // 2 + 1) * (sample_rate / frame_len)


def log_magnitude(values, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if epsilon <= 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")
    if np.any(values < 0):
        raise InvalidInputError("log_magnitude expects non-negative magnitudes")
    return np.log(values + epsilon)


def downmix(samples) -> np.ndarray:
    """Average channels of a ``(n_samples, n_channels)`` array to mono."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        return samples
    return samples.mean(axis=1)
