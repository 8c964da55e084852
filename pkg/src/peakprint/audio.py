"""WAV input/output and resampling."""

from __future__ import annotations

import struct
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin, resample_poly

from .dsp import Signal, downmix
from .errors import CorruptFileError, InvalidParameterError, UnsupportedFormatError

# Resampler: Kaiser-windowed sinc, beta 10 (about -100 dB sidelobes), cutoff at
# 0.9 of the lower Nyquist so the transition band ends at the new Nyquist.
RESAMPLE_BETA = 10.0
RESAMPLE_CUTOFF = 0.9
RESAMPLE_HALF_TAPS = 32

_INT_SCALE = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def read_wav(path) -> Signal:
    """Read a PCM16/24/32 or float WAV as a mono signal in [-1, 1].

    Integer samples are divided by 2**(bits-1) (so -32768 maps to -1.0 and
    16384 to 0.5).  Multi-channel files are averaged to mono.
    """
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except wavfile.WavFileWarning as exc:
        raise CorruptFileError(f"{path}: {exc}") from exc
    except ValueError as exc:
        message = str(exc)
        if "format" in message.lower() or "unsupported" in message.lower():
            raise UnsupportedFormatError(f"{path}: {message}") from exc
        raise CorruptFileError(f"{path}: {message}") from exc
    except (EOFError, struct.error) as exc:
        raise CorruptFileError(f"{path}: truncated file") from exc
    if data.dtype in _INT_SCALE:
        # 24-bit PCM comes back left-justified in int32, so one scale covers both.
        samples = data.astype(np.float64) / _INT_SCALE[data.dtype]
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormatError(f"{path}: unsupported sample type {data.dtype}")
    if samples.size == 0:
        raise CorruptFileError(f"{path}: no audio frames")
    return Signal(downmix(samples), float(rate))


def write_wav(path, signal: Signal) -> None:
    """Write 16-bit PCM; samples are scaled by 32768 and clamped."""
    if int(signal.sample_rate) != signal.sample_rate:
        raise InvalidParameterError("WAV needs an integer sample rate")
    pcm = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype(np.int16)
    wavfile.write(Path(path), int(signal.sample_rate), pcm)


def resample(signal: Signal, target_rate: float) -> Signal:
    """Polyphase windowed-sinc resampling to ``target_rate``.

    Output length is ``round(len * target / source)``.  The anti-aliasing
    filter is a Kaiser-windowed sinc (beta = `RESAMPLE_BETA`) cut off at
    `RESAMPLE_CUTOFF` times the lower Nyquist frequency.
    """
    if not (np.isfinite(target_rate) and target_rate > 0):
        raise InvalidParameterError(f"target_rate must be > 0, got {target_rate}")
    if target_rate == signal.sample_rate:
        return signal
    ratio = Fraction(target_rate / signal.sample_rate).limit_denominator(10000)
    up, down = ratio.numerator, ratio.denominator
    factor = max(up, down)
    taps = firwin(
        2 * RESAMPLE_HALF_TAPS * factor + 1,
        RESAMPLE_CUTOFF / factor,
        window=("kaiser", RESAMPLE_BETA),
    )  # resample_poly applies the gain of ``up`` itself
    out = resample_poly(signal.samples, up, down, window=taps)
    length = int(round(len(signal) * target_rate / signal.sample_rate))
    if out.size >= length:
        out = out[:length]
    else:
        out = np.pad(out, (0, length - out.size))
    if length < 1:
        raise InvalidParameterError("resampled signal would be empty")
    return Signal(out, float(target_rate))
