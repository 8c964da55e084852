"""Deconvolution (transposed convolution) layers, stacks and peak prediction.

A stride-``k`` layer scatters each input sample, scaled by the kernel, into
the output at offset ``k * i``.  The same map is available three ways:
scattering (`deconv_direct`), zero insertion followed by a unit-stride
convolution (`deconv_as_upsample_conv`) and an explicit matrix
(`deconv_matrix`).  They agree to rounding error under circular boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .dsp import (
    Kernel,
    Signal,
    as_kernel,
    convolve,
    linear_interp_upsample,
    triangular_kernel,
    zero_insert_upsample,
)
from .errors import InvalidInputError, InvalidParameterError

UPSAMPLE_MODES = ("zero_insert", "linear_interp")
ACTIVATIONS = ("none", "relu", "leaky_relu")
BOUNDARIES = ("circular", "zero")

DEFAULT_PEAK_WLEN = 5
DEFAULT_PROMINENCE_SIGMAS = 6.0

PRESETS = {
    "encodec48k": (8, 5, 4, 2),
}


@dataclass(frozen=True, eq=False)
class DeconvLayer:
    stride: int
    kernel: Kernel
    bias: float = 0.0
    upsample_mode: str = "zero_insert"

    def __post_init__(self):
        if isinstance(self.stride, bool) or int(self.stride) != self.stride or self.stride < 1:
            raise InvalidParameterError(f"stride must be an integer >= 1, got {self.stride!r}")
        if self.upsample_mode not in UPSAMPLE_MODES:
            raise InvalidParameterError(f"unknown upsample_mode {self.upsample_mode!r}")
        if not math.isfinite(self.bias):
            raise InvalidParameterError("bias must be finite")
        object.__setattr__(self, "stride", int(self.stride))
        object.__setattr__(self, "kernel", as_kernel(self.kernel))
        object.__setattr__(self, "bias", float(self.bias))

    def effective_taps(self) -> tuple[np.ndarray, int]:
        """Taps applied to the zero-inserted input and their centring offset.

        Linear-interpolation layers fold the triangular filter into the kernel.
        """
        if self.upsample_mode == "zero_insert":
            return self.kernel.taps, 0
        return np.convolve(triangular_kernel(self.stride), self.kernel.taps), self.stride - 1


@dataclass(frozen=True, eq=False)
class DeconvStack:
    layers: tuple[DeconvLayer, ...]
    activation: str = "leaky_relu"
    input_rate: float = 1.0
    negative_slope: float = 0.2
    boundary: str = "circular"

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InvalidParameterError("a stack needs at least one layer")
        if self.activation not in ACTIVATIONS:
            raise InvalidParameterError(f"unknown activation {self.activation!r}")
        if self.boundary not in BOUNDARIES:
            raise InvalidParameterError(f"unknown boundary {self.boundary!r}")
        if not self.input_rate > 0:
            raise InvalidParameterError("input_rate must be > 0")
        object.__setattr__(self, "layers", layers)

    @property
    def strides(self) -> list[int]:
        return [layer.stride for layer in self.layers]

    @property
    def total_stride(self) -> int:
        return math.prod(self.strides)

    @property
    def output_rate(self) -> float:
        return self.input_rate * self.total_stride

    def activate(self, x: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.maximum(x, 0.0)
        if self.activation == "leaky_relu":
            return np.where(x >= 0.0, x, self.negative_slope * x)
        return x


def _scatter(x: np.ndarray, taps: np.ndarray, shift: int, stride: int, boundary: str) -> np.ndarray:
    n_out = x.size * stride
    out = np.zeros(n_out)
    base = stride * np.arange(x.size) - shift
    for t, tap in enumerate(taps):
        if tap == 0.0:
            continue
        idx = base + t
        if boundary == "circular":
            # For a fixed tap the targets k*i + t are distinct mod kN.
            # Kernels longer than kN wrap onto themselves across taps, not within one.
            out[idx % n_out] += tap * x
        else:
            keep = (idx >= 0) & (idx < n_out)
            out[idx[keep]] += tap * x[keep]
    return out


def deconv_direct(signal: Signal, layer: DeconvLayer, *, boundary: str = "circular") -> Signal:
    """Transposed convolution: ``out[j] = sum_i in[i] * K[j - k*i] + bias``.

    ``boundary="zero"`` drops contributions that fall outside ``[0, kN)``
    instead of wrapping them, which is closer to a padded CNN layer but breaks
    the exact frequency-domain identities.
    """
    if boundary not in BOUNDARIES:
        raise InvalidParameterError(f"unknown boundary {boundary!r}")
    taps, shift = layer.effective_taps()
    out = _scatter(signal.samples, taps, shift, layer.stride, boundary)
    return Signal(out + layer.bias, signal.sample_rate * layer.stride)


def deconv_as_upsample_conv(signal: Signal, layer: DeconvLayer) -> Signal:
    """Upsample (zeros or linear interpolation), convolve circularly, add bias."""
    if layer.upsample_mode == "zero_insert":
        upsampled = zero_insert_upsample(signal, layer.stride)
    else:
        upsampled = linear_interp_upsample(signal, layer.stride)
    conv = convolve(upsampled, layer.kernel, mode="circular")
    return Signal(conv.samples + layer.bias, conv.sample_rate)


def deconv_matrix(layer: DeconvLayer, input_len: int) -> np.ndarray:
    """``(stride * input_len, input_len)`` matrix with the kernel tiled down each column."""
    if input_len < 1:
        raise InvalidParameterError("input_len must be >= 1")
    taps, shift = layer.effective_taps()
    n_out = layer.stride * input_len
    matrix = np.zeros((n_out, input_len))
    cols = np.arange(input_len)
    for t, tap in enumerate(taps):
        rows = (layer.stride * cols + t - shift) % n_out
        matrix[rows, cols] += tap
    return matrix


def strided_conv(signal: np.ndarray, taps: np.ndarray, stride: int) -> np.ndarray:
    """Forward strided circular convolution (correlation form), ``y[i] = sum_t K[t] x[k*i + t]``.

    It is the adjoint of the zero-insert deconvolution with the same kernel.
    """
    n = signal.size
    out_len = n // stride
    base = stride * np.arange(out_len)
    y = np.zeros(out_len)
    for t, tap in enumerate(taps):
        y += tap * signal[(base + t) % n]
    return y


def run_stack(signal: Signal, stack: DeconvStack, *, record: bool = False):
    """Apply each layer in turn, activating between layers but not after the last.

    With ``record=True`` returns ``(output, stages)`` where ``stages`` holds the
    input followed by every layer output (post-activation for inner layers).
    """
    stages = [signal]
    x = signal.samples
    rate = signal.sample_rate
    last = len(stack.layers) - 1
    for index, layer in enumerate(stack.layers):
        taps, shift = layer.effective_taps()
        x = _scatter(x, taps, shift, layer.stride, stack.boundary) + layer.bias
        rate *= layer.stride
        if index != last:
            x = stack.activate(x)
        if record:
            stages.append(Signal(x, rate))
    out = Signal(x, rate)
    if record:
        return out, stages
    return out


def random_stack(
    strides: Sequence[int],
    *,
    seed,
    input_rate: float = 1.0,
    kernel_lens: Sequence[int] | None = None,
    activation: str = "leaky_relu",
    upsample_mode: str = "zero_insert",
    bias_range: tuple[float, float] = (0.01, 0.1),
) -> DeconvStack:
    """Random-weight stack: kernels ~ U(-1, 1)/sqrt(len), biases ~ U(bias_range).

    Kernel length defaults to twice the stride, a common decoder choice.
    """
    if kernel_lens is None:
        kernel_lens = [2 * k for k in strides]
    if len(kernel_lens) != len(strides):
        raise InvalidParameterError("kernel_lens must match strides")
    seeds = np.random.SeedSequence(seed).spawn(len(strides))
    layers = [
        _random_layer(k, int(length), s, upsample_mode, bias_range)
        for k, length, s in zip(strides, kernel_lens, seeds)
    ]
    return DeconvStack(tuple(layers), activation=activation, input_rate=input_rate)


@dataclass(frozen=True)
class PeakPrediction:
    strides: tuple[int, ...]
    fractions: tuple[Fraction, ...]
    per_layer_counts: tuple[tuple[int, int], ...]
    output_rate: float | None = None
    normalized_frequencies: tuple[float, ...] = field(init=False)
    absolute_frequencies: tuple[float, ...] | None = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "normalized_frequencies", tuple(float(f) for f in self.fractions))
        absolute = None
        if self.output_rate is not None:
            absolute = tuple(float(f * Fraction(self.output_rate)) for f in self.fractions)
        object.__setattr__(self, "absolute_frequencies", absolute)

    @property
    def peak_count(self) -> int:
        return len(self.fractions)

    @property
    def total_stride(self) -> int:
        return math.prod(self.strides)

    @property
    def spacing_hz(self) -> float | None:
        if self.output_rate is None:
            return None
        return self.output_rate / self.total_stride

    def to_dict(self) -> dict:
        return {
            "strides": list(self.strides),
            "total_stride": self.total_stride,
            "peak_count": self.peak_count,
            "per_layer_counts": [list(pair) for pair in self.per_layer_counts],
            "output_rate": self.output_rate,
            "spacing_hz": self.spacing_hz,
            "normalized_frequencies": list(self.normalized_frequencies),
            "absolute_frequencies": (
                None if self.absolute_frequencies is None else list(self.absolute_frequencies)
            ),
        }


def predict_peaks(strides: Sequence[int], output_rate: float | None = None) -> PeakPrediction:
    """Artifact peak frequencies produced by a stack with the given strides.

    A DC component entering the stack is cloned at every multiple of the input
    rate, giving ``floor(P/2) + 1`` peaks in the output half-spectrum at
    ``n / P`` cycles per sample, where ``P`` is the product of strides.
    Frequencies are kept as exact fractions.
    """
    strides = list(strides)
    if not strides:
        raise InvalidParameterError("need at least one stride")
    for k in strides:
        if isinstance(k, bool) or int(k) != k or k < 1:
            raise InvalidParameterError(f"strides must be integers >= 1, got {k!r}")
    if output_rate is not None and not output_rate > 0:
        raise InvalidParameterError("output_rate must be > 0")
    strides = [int(k) for k in strides]
    total = math.prod(strides)
    # n / P for increasing n is already distinct and ascending.
    fracs = [Fraction(n, total) for n in range(total // 2 + 1)]
    per_layer = tuple((i, k // 2) for i, k in enumerate(strides))
    return PeakPrediction(tuple(strides), tuple(fracs), per_layer, output_rate)


def noise_scale(values) -> float:
    """Robust per-bin noise level: scaled MAD of first differences over sqrt(2).

    Sparse sharp peaks and slow trends barely move it, unlike a MAD of the
    values themselves.
    """
    d = np.diff(np.asarray(values, dtype=np.float64))
    if d.size == 0:
        return 0.0
    return float(1.4826 * np.median(np.abs(d - np.median(d))) / math.sqrt(2.0))


def default_prominence(values) -> float:
    return DEFAULT_PROMINENCE_SIGMAS * noise_scale(values)


def measure_peaks(
    values,
    min_prominence: float | None = None,
    *,
    wlen: int = DEFAULT_PEAK_WLEN,
    mirror_edges: bool = False,
) -> list[int]:
    """Indices of local maxima whose prominence exceeds ``min_prominence``.

    Prominence is the height above the higher of the two neighbouring minima,
    searched within ``wlen`` samples centred on the peak; the short window
    keeps broad spectral bumps from qualifying.  The default threshold is
    `DEFAULT_PROMINENCE_SIGMAS` times `noise_scale`.  Endpoints are never
    peaks unless ``mirror_edges`` is set, in which case the vector is
    reflected about both ends first, as a half-spectrum is about DC and
    Nyquist.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInputError("measure_peaks needs a non-empty 1-D vector")
    if min_prominence is None:
        min_prominence = default_prominence(x)
    n = x.size
    offset = 0
    if mirror_edges and n > 1:
        x = np.concatenate([x[:0:-1], x, x[-2::-1]])
        offset = n - 1
    if x.size < 3:
        return []
    peaks, props = find_peaks(x, prominence=(None, None), wlen=wlen)
    hits = peaks[props["prominences"] > min_prominence] - offset
    return sorted({int(i) for i in hits if 0 <= i < n})


def _random_layer(stride: int, kernel_len: int, seed, upsample_mode: str,
                  bias_range: tuple[float, float] = (0.01, 0.1)) -> DeconvLayer:
    rng = np.random.default_rng(seed)
    taps = rng.uniform(-1.0, 1.0, size=kernel_len) / math.sqrt(kernel_len)
    return DeconvLayer(stride, Kernel(taps), rng.uniform(*bias_range), upsample_mode)


def stack_from_config(config: dict) -> DeconvStack:
    """Build a stack from its JSON form.

    ``{"input_rate": Hz, "activation": str, "layers": [{"stride", "kernel_len",
    "upsample_mode", "seed"}]}``.  A layer may give explicit ``"kernel"`` taps
    and ``"bias"`` instead of a seed; ``{"preset": name}`` expands a named
    stride schedule with seeded random layers.
    """
    config = dict(config)
    if "preset" in config:
        name = config.pop("preset")
        if name not in PRESETS:
            raise InvalidParameterError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        seed = int(config.pop("seed", 0))
        config.setdefault("layers", [
            {"stride": k, "kernel_len": 2 * k, "seed": seed + i}
            for i, k in enumerate(PRESETS[name])
        ])
    layers_cfg = config.get("layers")
    if not layers_cfg:
        raise InvalidParameterError("stack config needs a non-empty 'layers' list")
    layers = []
    for i, spec in enumerate(layers_cfg):
        stride = spec.get("stride")
        if stride is None:
            raise InvalidParameterError(f"layer {i} has no stride")
        mode = spec.get("upsample_mode", "zero_insert")
        if "kernel" in spec:
            layers.append(DeconvLayer(stride, Kernel(spec["kernel"]), float(spec.get("bias", 0.0)), mode))
        else:
            kernel_len = int(spec.get("kernel_len", 2 * int(stride)))
            if kernel_len < 1:
                raise InvalidParameterError(f"layer {i}: kernel_len must be >= 1")
            layer = _random_layer(int(stride), kernel_len, spec.get("seed", i), mode)
            if "bias" in spec:
                layer = DeconvLayer(layer.stride, layer.kernel, float(spec["bias"]), mode)
            layers.append(layer)
    return DeconvStack(
        tuple(layers),
        activation=config.get("activation", "leaky_relu"),
        input_rate=float(config.get("input_rate", 1.0)),
        negative_slope=float(config.get("negative_slope", 0.2)),
        boundary=config.get("boundary", "circular"),
    )
