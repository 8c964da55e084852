import json

import numpy as np
import pytest

from peakprint.audio import read_wav, write_wav
from peakprint.dsp import Signal
from peakprint.errors import InvalidInputError, InvalidParameterError
from peakprint.fingerprint import extract_fingerprint, predicted_bins
from peakprint.synth import (
    MANIFEST_NAME,
    ManifestEntry,
    StackSpec,
    SynthSpec,
    generate_synth_dataset,
    harmonic_mixture,
    pink_noise,
    read_manifest,
    synth_examples,
    write_manifest,
)

ENCODEC = StackSpec("encodec-like", (8, 5, 4, 2), 7)


def small_spec(**kw):
    base = dict(n_per_class=3, duration_s=1.0, stacks=(ENCODEC,), seed=4)
    base.update(kw)
    return SynthSpec(**base)


class TestSpec:
    def test_from_dict_forms(self):
        a = SynthSpec.from_dict({"n_per_class": 2, "duration_s": 1.0,
                                 "stacks": [["x", [4, 2], 3]]})
        b = SynthSpec.from_dict({"n_per_class": 2, "duration_s": 1.0,
                                 "stacks": [{"tag": "x", "strides": [4, 2], "seed": 3}]})
        assert a == b
        assert a.labels == ["real", "x"]

    @pytest.mark.parametrize("kw", [{"n_per_class": 0}, {"duration_s": 0},
                                    {"real_source": "mp3"}, {"real_source": "file_dir"}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidParameterError):
            small_spec(**kw)

    def test_bad_stack(self):
        with pytest.raises(InvalidParameterError):
            StackSpec("real", (2,))
        with pytest.raises(InvalidParameterError):
            StackSpec("x", (0, 2))


class TestSources:
    def test_pink_noise_slope(self):
        x = pink_noise(2 ** 16, np.random.default_rng(0))
        power = np.abs(np.fft.rfft(x)) ** 2
        low, high = power[100:200].mean(), power[1000:2000].mean()
        # 1/f power: a decade up in frequency is roughly 10 dB down.
        assert 5 < 10 * np.log10(low / high) < 15
        assert np.sqrt(np.mean(x ** 2)) == pytest.approx(1.0)

    def test_harmonic_mixture_length(self):
        x = harmonic_mixture(0.5, 48000, np.random.default_rng(1))
        assert x.shape == (24000,)
        assert np.all(np.isfinite(x))


class TestGenerate:
    def test_one_entry(self, tmp_path):
        entries = generate_synth_dataset(small_spec(n_per_class=1), tmp_path)
        assert len(entries) == 2
        assert sorted(p.name for p in tmp_path.iterdir()) == [
            "encodec-like_00000.wav", MANIFEST_NAME, "real_00000.wav"]
        manifest = read_manifest(tmp_path / MANIFEST_NAME)
        assert [e.label for e in manifest] == ["real", "encodec-like"]
        for entry in manifest:
            audio = read_wav(entry.path)
            assert audio.sample_rate == 48000 and len(audio) == 48000

    def test_bitwise_deterministic(self, tmp_path):
        generate_synth_dataset(small_spec(), tmp_path / "a")
        generate_synth_dataset(small_spec(), tmp_path / "b", threads=3)
        for path in sorted((tmp_path / "a").iterdir()):
            assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()

    def test_seed_changes_output(self):
        a = [e.signal.samples for e in synth_examples(small_spec(n_per_class=1))]
        b = [e.signal.samples for e in synth_examples(small_spec(n_per_class=1, seed=5))]
        assert not np.array_equal(a[1], b[1])

    def test_classes_match_length_and_peak(self):
        examples = list(synth_examples(small_spec(n_per_class=2)))
        assert {len(e.signal) for e in examples} == {48000}
        for e in examples:
            assert np.max(np.abs(e.signal.samples)) == pytest.approx(0.9)

    def test_synthetic_shows_grid(self):
        spec = small_spec(n_per_class=3, duration_s=6.0, seed=1)
        grid = predicted_bins([8, 5, 4, 2], 8192, 48000, (5000, 16000))
        for example in synth_examples(spec):
            fp = extract_fingerprint(example.signal)
            on = np.isin(fp.bin_indices, grid)
            contrast = fp.values[on].mean() / np.median(fp.values[~on])
            # Latent tones add their own replicas, so individual peaks can sit
            # off the grid; the 150 Hz grid still dominates synthetic clips.
            if example.label == "real":
                assert contrast < 2.0
            else:
                assert contrast > 4.0

    def test_file_dir_source(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        rng = np.random.default_rng(2)
        write_wav(src / "a.wav", Signal(0.3 * rng.standard_normal(44100 * 2), 44100))
        spec = small_spec(n_per_class=2, real_source="file_dir", source_dir=str(src))
        examples = list(synth_examples(spec))
        assert len(examples) == 4
        assert {len(e.signal) for e in examples} == {48000}

    def test_file_dir_empty(self, tmp_path):
        spec = small_spec(real_source="file_dir", source_dir=str(tmp_path))
        with pytest.raises(InvalidInputError):
            list(synth_examples(spec))


class TestManifest:
    def test_round_trip_and_relative(self, tmp_path):
        entries = [ManifestEntry("a.wav", "real", 48000.0, 1.0), ManifestEntry("/abs/b.wav", "x")]
        write_manifest(tmp_path / "m.jsonl", entries)
        back = read_manifest(tmp_path / "m.jsonl")
        assert back[0].path == str(tmp_path / "a.wav")
        assert back[1].path == "/abs/b.wav"
        assert back[0].sample_rate == 48000.0

    def test_empty_label(self):
        with pytest.raises(InvalidInputError):
            ManifestEntry("a.wav", "")

    def test_bad_json(self, tmp_path):
        (tmp_path / "m.jsonl").write_text('{"path": "a.wav", "label": "real"}\nnot json\n')
        with pytest.raises(InvalidInputError):
            read_manifest(tmp_path / "m.jsonl")

    def test_lines_are_json(self, tmp_path):
        generate_synth_dataset(small_spec(n_per_class=1), tmp_path)
        for line in (tmp_path / MANIFEST_NAME).read_text().splitlines():
            record = json.loads(line)
            assert set(record) == {"path", "label", "sample_rate", "duration_s"}
