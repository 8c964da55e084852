import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from peakprint.dsp import (
    Kernel,
    Signal,
    Spectrum,
    average_frame_spectrum,
    convolve,
    dft,
    downmix,
    idft,
    linear_interp_upsample,
    log_magnitude,
    triangular_kernel,
    zero_insert_upsample,
)
from peakprint.errors import InsufficientDataError, InvalidInputError, InvalidParameterError


def naive_dft(x):
    """O(N^2) reference sum."""
    n = len(x)
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) @ np.asarray(x, dtype=complex)


def sig(x, rate=1.0):
    return Signal(np.asarray(x, dtype=float), rate)


class TestSignal:
    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            Signal(np.array([]), 8000)

    def test_rejects_nan(self):
        with pytest.raises(InvalidInputError):
            Signal(np.array([0.0, np.nan]), 8000)

    def test_rejects_bad_rate(self):
        with pytest.raises(InvalidParameterError):
            Signal(np.ones(4), 0.0)

    def test_samples_read_only(self):
        s = sig([1.0, 2.0])
        with pytest.raises(ValueError):
            s.samples[0] = 5.0

    def test_duration(self):
        assert sig(np.zeros(48000), 48000).duration == 1.0


class TestDFT:
    def test_impulse(self):
        x = np.zeros(8)
        x[0] = 1.0
        assert_allclose(dft(sig(x)).bins, np.ones(8), atol=1e-12)

    def test_single_tone(self):
        n = 16
        x = np.cos(2 * np.pi * 2 * np.arange(n) / n)
        expected = np.zeros(n, dtype=complex)
        expected[[2, 14]] = n / 2
        assert_allclose(dft(sig(x)).bins, expected, atol=1e-9)

    @pytest.mark.parametrize("n", [1, 7, 13, 64, 100])
    def test_matches_naive(self, n):
        x = np.random.default_rng(n).standard_normal(n)
        assert_allclose(dft(sig(x)).bins, naive_dft(x), atol=1e-9)

    def test_resolution(self):
        spec = dft(sig(np.ones(100), 8000))
        assert spec.bin_resolution == 80.0
        assert spec.origin_length == 100

    def test_parseval(self):
        x = np.random.default_rng(1).standard_normal(257)
        energy = np.sum(x ** 2)
        assert_allclose(np.sum(np.abs(dft(sig(x)).bins) ** 2) / x.size, energy, rtol=1e-9)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        x, y = rng.standard_normal((2, 50))
        a, b = 1.7, -0.3
        lhs = dft(sig(a * x + b * y)).bins
        assert_allclose(lhs, a * dft(sig(x)).bins + b * dft(sig(y)).bins, atol=1e-9)

    def test_real_input_is_hermitian(self):
        assert dft(sig(np.random.default_rng(3).standard_normal(31))).is_hermitian()


class TestIDFT:
    def test_ones_give_impulse(self):
        out = idft(Spectrum(np.ones(8), 1.0, 8)).samples
        expected = np.zeros(8)
        expected[0] = 1.0
        assert_allclose(out, expected, atol=1e-12)

    def test_round_trip(self):
        x = np.random.default_rng(4).standard_normal(64)
        assert_allclose(idft(dft(sig(x, 100.0))).samples, x, rtol=1e-9, atol=1e-12)

    def test_rate_preserved(self):
        assert idft(dft(sig(np.ones(10), 44100.0))).sample_rate == 44100.0

    def test_symmetric_spectrum_is_real(self):
        rng = np.random.default_rng(5)
        n = 32
        half = rng.standard_normal(n // 2 + 1) + 1j * rng.standard_normal(n // 2 + 1)
        half[0] = half[0].real
        half[-1] = half[-1].real
        full = np.concatenate([half, np.conj(half[-2:0:-1])])
        spectrum = Spectrum(full, 1.0, n)
        assert spectrum.is_hermitian()
        assert_allclose(idft(spectrum).samples, np.fft.ifft(full).real, atol=1e-12)
        assert np.max(np.abs(np.fft.ifft(full).imag)) < 1e-9

    def test_asymmetric_spectrum_rejected(self):
        bins = np.zeros(8, dtype=complex)
        bins[1] = 1.0
        with pytest.raises(InvalidInputError):
            idft(Spectrum(bins, 1.0, 8))

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            Spectrum(np.ones(4), 1.0, 5)


class TestZeroInsert:
    def test_identity_stride(self):
        assert_array_equal(zero_insert_upsample(sig([1, 2, 3]), 1).samples, [1, 2, 3])

    def test_definition(self):
        out = zero_insert_upsample(sig([1, 2], 100.0), 3)
        assert_array_equal(out.samples, [1, 0, 0, 2, 0, 0])
        assert out.sample_rate == 300.0

    def test_zero_factor(self):
        with pytest.raises(InvalidParameterError):
            zero_insert_upsample(sig([1, 2]), 0)

    def test_spectrum_tiles(self):
        x = np.random.default_rng(6).standard_normal(8)
        up = naive_dft(zero_insert_upsample(sig(x), 4).samples)
        assert_allclose(up, np.tile(naive_dft(x), 4), atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 64), k=st.integers(1, 8), seed=st.integers(0, 2**16))
    def test_periodization_identity(self, n, k, seed):
        x = np.random.default_rng(seed).standard_normal(n)
        up = dft(zero_insert_upsample(sig(x), k)).bins
        base = dft(sig(x)).bins
        m = np.arange(k * n)
        assert_allclose(up, base[m % n], atol=1e-9 * max(1.0, np.abs(base).max()))


class TestLinearInterp:
    def test_midpoints(self):
        assert_allclose(linear_interp_upsample(sig([0, 1]), 2).samples, [0, 0.5, 1, 0.5])

    def test_constant_fixed_point(self):
        assert_allclose(linear_interp_upsample(sig(np.full(6, 2.5)), 4).samples, 2.5)

    def test_keeps_originals(self):
        x = np.random.default_rng(7).standard_normal(9)
        assert_allclose(linear_interp_upsample(sig(x), 3).samples[::3], x, atol=1e-12)

    def test_stride_one(self):
        x = np.arange(5.0)
        assert_array_equal(linear_interp_upsample(sig(x), 1).samples, x)

    def test_composition(self):
        x = np.random.default_rng(8).standard_normal(16)
        k = 3
        composed = convolve(zero_insert_upsample(sig(x), k), Kernel(triangular_kernel(k))).samples
        # The triangle is centred, so undo its k-1 sample delay.
        assert_allclose(linear_interp_upsample(sig(x), k).samples, np.roll(composed, -(k - 1)),
                        atol=1e-12)

    def test_triangle_taps(self):
        assert_allclose(triangular_kernel(2), [0.5, 1.0, 0.5])
        assert_allclose(triangular_kernel(3), [1 / 3, 2 / 3, 1, 2 / 3, 1 / 3])

    def test_zero_factor(self):
        with pytest.raises(InvalidParameterError):
            linear_interp_upsample(sig([1.0]), 0)


class TestConvolve:
    def test_identity_kernel(self):
        x = np.random.default_rng(9).standard_normal(10)
        for mode in ("full", "same", "circular"):
            assert_allclose(convolve(sig(x), [1.0], mode).samples, x)

    def test_impulse_response(self):
        a, b, c = 0.3, -1.2, 2.0
        out = convolve(sig([1, 0, 0, 0]), [a, b, c], "circular").samples
        assert_allclose(out, [a, b, c, 0])

    def test_circular_wraps(self):
        out = convolve(sig([0, 0, 0, 1]), [1, 2, 3], "circular").samples
        assert_allclose(out, [2, 3, 0, 1])

    def test_convolution_theorem(self):
        rng = np.random.default_rng(10)
        x, taps = rng.standard_normal(32), rng.standard_normal(5)
        padded = np.zeros(32)
        padded[:5] = taps
        expected = np.fft.ifft(naive_dft(x) * naive_dft(padded)).real
        assert_allclose(convolve(sig(x), taps).samples, expected, atol=1e-9)

    def test_long_kernel_fft_path(self):
        rng = np.random.default_rng(11)
        x, taps = rng.standard_normal(300), rng.standard_normal(100)
        padded = np.zeros(300)
        padded[:100] = taps
        expected = np.fft.ifft(np.fft.fft(x) * np.fft.fft(padded)).real
        assert_allclose(convolve(sig(x), taps).samples, expected, atol=1e-9)

    def test_full_and_same(self):
        x = [1.0, 2.0, 3.0]
        assert_allclose(convolve(sig(x), [1.0, 1.0], "full").samples, [1, 3, 5, 3])
        assert_allclose(convolve(sig(x), [1.0, 1.0, 1.0], "same").samples, [3, 6, 5])

    def test_unknown_mode(self):
        with pytest.raises(InvalidParameterError):
            convolve(sig([1.0]), [1.0], "valid")


class TestAverageFrameSpectrum:
    def test_in_bin_sine(self):
        n = 1024
        x = np.sin(2 * np.pi * 64 * np.arange(4 * n) / n)
        avg = average_frame_spectrum(sig(x), n)
        assert avg.shape == (n // 2 + 1,)
        assert np.argmax(avg) == 64
        others = np.delete(avg, 64)
        assert others.max() < 1e-6 * avg[64]

    def test_white_noise_flat(self):
        x = np.random.default_rng(12).standard_normal(100 * 256)
        avg = average_frame_spectrum(sig(x), 256)[1:-1]
        assert avg.max() / avg.min() < 2.0

    def test_two_frames_mean(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal(2 * 64 + 10)
        f1, f2 = np.abs(np.fft.rfft(x[:64])), np.abs(np.fft.rfft(x[64:128]))
        assert_allclose(average_frame_spectrum(sig(x), 64), (f1 + f2) / 2, rtol=1e-12)

    def test_frame_permutation(self):
        rng = np.random.default_rng(14)
        frames = rng.standard_normal((6, 32))
        a = average_frame_spectrum(sig(frames.ravel()), 32)
        b = average_frame_spectrum(sig(frames[rng.permutation(6)].ravel()), 32)
        assert_allclose(a, b, rtol=1e-12)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            average_frame_spectrum(sig(np.ones(100)), 128)

    def test_hann_option(self):
        n = 256
        x = np.sin(2 * np.pi * 10.5 * np.arange(8 * n) / n)
        rect = average_frame_spectrum(sig(x), n)
        hann = average_frame_spectrum(sig(x), n, window="hann")
        # Tapering lowers leakage far from the tone.
        assert hann[60] / hann.max() < rect[60] / rect.max()

    def test_overlap_frames(self):
        x = np.random.default_rng(15).standard_normal(512)
        avg = average_frame_spectrum(sig(x), 128, overlap=0.5)
        frames = [x[i:i + 128] for i in range(0, 512 - 127, 64)]
        assert_allclose(avg, np.mean([np.abs(np.fft.rfft(f)) for f in frames], axis=0))


class TestLogMagnitude:
    def test_zeros(self):
        assert_allclose(log_magnitude(np.zeros(4), 1e-10), np.log(1e-10))

    def test_gain_shift(self):
        x = np.array([1.0, 10.0, 300.0])
        assert_allclose(log_magnitude(5.0 * x) - log_magnitude(x), np.log(5.0), atol=1e-9)

    def test_example(self):
        eps = 1e-10
        assert_allclose(log_magnitude([1.0, np.e - eps], eps), [np.log(1 + eps), 1.0], rtol=1e-15)

    def test_monotone(self):
        x = np.sort(np.random.default_rng(16).uniform(0, 5, 50))
        assert np.all(np.diff(log_magnitude(x)) >= 0)

    def test_negative_rejected(self):
        with pytest.raises(InvalidInputError):
            log_magnitude([-1.0])

    def test_bad_epsilon(self):
        with pytest.raises(InvalidParameterError):
            log_magnitude([1.0], 0.0)


class TestDownmix:
    def test_opposite_channels_cancel(self):
        x = np.random.default_rng(17).standard_normal(20)
        assert_allclose(downmix(np.stack([x, -x], axis=1)), 0.0)

    def test_mono_passthrough(self):
        assert_allclose(downmix(np.arange(3.0)), [0, 1, 2])
