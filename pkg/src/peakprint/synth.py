"""Desk-scale stand-in for a real-vs-codec dataset.

"Real" clips are harmonic mixtures (or noise, or user WAVs).  Each synthetic
clip is the same source squeezed down to a latent at ``rate / prod(strides)``
and decoded again by a freshly seeded random-weight deconvolution stack, so
the only systematic difference between classes is the stack's artifact.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .audio import read_wav, resample, write_wav
from .deconv import random_stack, run_stack
from .dsp import Signal
from .errors import InvalidInputError, InvalidParameterError

REAL_LABEL = "real"
REAL_SOURCES = ("noise", "harmonic_mixture", "file_dir")
MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    sample_rate: float | None = None
    duration_s: float | None = None

    def __post_init__(self):
        if not self.label:
            raise InvalidInputError("manifest label must be non-empty")


def write_manifest(path, entries: Sequence[ManifestEntry]) -> None:
    with open(path, "w") as fh:
        for entry in entries:
            fh.write(json.dumps(asdict(entry)) + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    """Load a JSONL manifest; relative paths resolve against its directory."""
    path = Path(path)
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
            audio = Path(record["path"])
            if not audio.is_absolute():
                audio = path.parent / audio
            entries.append(ManifestEntry(
                str(audio), record["label"], record.get("sample_rate"), record.get("duration_s"),
            ))
    return entries


@dataclass(frozen=True)
class StackSpec:
    tag: str
    strides: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        if self.tag == REAL_LABEL:
            raise InvalidParameterError(f"stack tag {REAL_LABEL!r} is reserved")
        if not self.strides or any(int(k) != k or k < 1 for k in self.strides):
            raise InvalidParameterError(f"invalid strides {self.strides!r}")
        object.__setattr__(self, "strides", tuple(int(k) for k in self.strides))


@dataclass(frozen=True)
class SynthSpec:
    n_per_class: int
    duration_s: float
    stacks: tuple[StackSpec, ...]
    real_source: str = "harmonic_mixture"
    output_rate: float = 48000.0
    seed: int = 0
    source_dir: str | None = None
    activation: str = "leaky_relu"
    # The latent is rescaled to this mean/std: a dominant DC term, as the
    # peak argument assumes an input with most of its energy at 0 Hz.
    latent_mean: float = 1.0
    latent_std: float = 0.25
    output_peak: float = 0.9

    def __post_init__(self):
        if self.n_per_class < 1:
            raise InvalidParameterError("n_per_class must be >= 1")
        if not self.duration_s > 0:
            raise InvalidParameterError("duration_s must be > 0")
        if self.real_source not in REAL_SOURCES:
            raise InvalidParameterError(f"real_source must be one of {REAL_SOURCES}")
        if self.real_source == "file_dir" and not self.source_dir:
            raise InvalidParameterError("real_source 'file_dir' needs source_dir")
        object.__setattr__(self, "stacks", tuple(
            s if isinstance(s, StackSpec) else StackSpec(**s) for s in self.stacks
        ))

    @property
    def labels(self) -> list[str]:
        return [REAL_LABEL] + [s.tag for s in self.stacks]

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        data = dict(data)
        stacks = []
        for item in data.pop("stacks", []):
            if isinstance(item, (list, tuple)):
                tag, strides, seed = item
                item = {"tag": tag, "strides": strides, "seed": seed}
            stacks.append(StackSpec(item["tag"], tuple(item["strides"]), int(item.get("seed", 0))))
        return cls(stacks=tuple(stacks), **data)

    @classmethod
    def load(cls, path) -> "SynthSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-RMS 1/f noise by spectral shaping of white noise."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.arange(spectrum.size, dtype=np.float64)
    freqs[0] = np.inf
    noise = np.fft.irfft(spectrum / np.sqrt(freqs), n)
    return noise / np.sqrt(np.mean(noise ** 2))


def harmonic_mixture(duration_s: float, rate: float, rng: np.random.Generator) -> np.ndarray:
    """5-15 sinusoids (log-uniform 50 Hz-10 kHz, amplitude ~ 1/sqrt(f)) plus pink noise at -20 dB."""
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    count = int(rng.integers(5, 16))
    freqs = np.exp(rng.uniform(math.log(50.0), math.log(min(10000.0, 0.45 * rate)), count))
    amps = np.sqrt(50.0 / freqs) * rng.uniform(0.5, 1.0, count)
    phases = rng.uniform(0, 2 * np.pi, count)
    tones = np.zeros(n)
    for f, a, p in zip(freqs, amps, phases):
        tones += a * np.sin(2 * np.pi * f * t + p)
    rms = np.sqrt(np.mean(tones ** 2))
    return tones + 0.1 * rms * pink_noise(n, rng)


def _normalize_peak(x: np.ndarray, peak: float) -> np.ndarray:
    top = np.max(np.abs(x))
    return x if top == 0 else x * (peak / top)


@dataclass(frozen=True, eq=False)
class SynthExample:
    index: int
    label: str
    signal: Signal
    strides: tuple[int, ...] = field(default=())


class _SourceBank:
    def __init__(self, spec: SynthSpec):
        self.spec = spec
        self.files = []
        if spec.real_source == "file_dir":
            self.files = sorted(Path(spec.source_dir).glob("*.wav"))
            if not self.files:
                raise InvalidInputError(f"no .wav files in {spec.source_dir}")

    def source(self, index: int) -> np.ndarray:
        spec = self.spec
        rng = np.random.default_rng([spec.seed, index, 0])
        n = int(round(spec.duration_s * spec.output_rate))
        if spec.real_source == "harmonic_mixture":
            return harmonic_mixture(spec.duration_s, spec.output_rate, rng)
        if spec.real_source == "noise":
            return 0.1 * rng.standard_normal(n)
        audio = resample(read_wav(self.files[index % len(self.files)]), spec.output_rate)
        return audio.samples[:n]


def synthesize_entry(spec: SynthSpec, index: int, bank: _SourceBank | None = None) -> list[SynthExample]:
    """The real clip for ``index`` followed by one synthetic clip per stack."""
    bank = bank or _SourceBank(spec)
    source = bank.source(index)
    rate = spec.output_rate
    examples = [SynthExample(index, REAL_LABEL, Signal(_normalize_peak(source, spec.output_peak), rate))]
    for stack_spec in spec.stacks:
        total = math.prod(stack_spec.strides)
        latent_rate = rate / total
        latent = resample(Signal(source, rate), latent_rate).samples
        std = np.std(latent)
        centred = (latent - latent.mean()) / std if std > 0 else np.zeros_like(latent)
        latent = spec.latent_mean + spec.latent_std * centred
        stack = random_stack(
            stack_spec.strides,
            seed=[stack_spec.seed, index],
            input_rate=latent_rate,
            activation=spec.activation,
        )
        out = run_stack(Signal(latent, latent_rate), stack).samples
        if out.size < source.size:
            out = np.pad(out, (0, source.size - out.size), mode="wrap")
        out = out[:source.size]
        examples.append(SynthExample(
            index, stack_spec.tag, Signal(_normalize_peak(out, spec.output_peak), rate),
            stack_spec.strides,
        ))
    return examples


def synth_examples(spec: SynthSpec, threads: int = 1) -> Iterator[SynthExample]:
    """All examples in (entry, class) order, independent of ``threads``."""
    bank = _SourceBank(spec)
    indices = range(spec.n_per_class)
    if threads <= 1:
        for i in indices:
            yield from synthesize_entry(spec, i, bank)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for batch in pool.map(lambda i: synthesize_entry(spec, i, bank), indices):
            yield from batch


def generate_synth_dataset(spec: SynthSpec, out_dir, threads: int = 1) -> list[ManifestEntry]:
    """Write every example as 16-bit WAV plus ``manifest.jsonl`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for example in synth_examples(spec, threads):
        name = f"{example.label}_{example.index:05d}.wav"
        write_wav(out_dir / name, example.signal)
        entries.append(ManifestEntry(
            name, example.label, example.signal.sample_rate, example.signal.duration,
        ))
    write_manifest(out_dir / MANIFEST_NAME, entries)
    return entries
