import numpy as np
import pytest

from lorarffi.errors import ConfigurationError, ShapeError
from lorarffi.phy import ComplexSignal, LoRaParams, basic_chirp, preamble_sequence
from lorarffi.representations import (
    LOG_FLOOR,
    represent,
    representation_shape,
    spectrogram_columns,
    to_fft,
    to_iq,
    to_spectrogram,
)


def params(n_preambles=8):
    return LoRaParams(sf=7, bw=125e3, fc=868.1e6, ts=1e-6, n_preambles=n_preambles)


def dft_oracle(x):
    """Direct O(N^2) DFT by definition."""
    n = len(x)
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return basis @ x


class TestToIq:
    def test_definition(self):
        sig = ComplexSignal(np.array([1 + 2j, 3 - 4j]), 1e-6)
        np.testing.assert_array_equal(to_iq(sig).data, [[1, 3], [2, -4]])

    def test_real_input_zero_row(self):
        sig = ComplexSignal(np.array([1.0, 2.0, 3.0], dtype=complex), 1e-6)
        assert np.all(to_iq(sig).data[1] == 0)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        samples = rng.normal(size=32) + 1j * rng.normal(size=32)
        data = to_iq(ComplexSignal(samples, 1e-6)).data
        np.testing.assert_array_equal(data[0] + 1j * data[1], samples)

    def test_length_check(self):
        sig = ComplexSignal(np.ones(8, dtype=complex), 1e-6)
        with pytest.raises(ShapeError):
            to_iq(sig, expected_len=16)


class TestToFft:
    def test_constant_signal(self):
        sig = ComplexSignal(np.ones(4, dtype=complex), 1e-6)
        data = to_fft(sig).data
        mags = np.abs(data[0] + 1j * data[1])
        assert mags[2] == pytest.approx(4.0)  # DC lands at N/2 after centering
        assert np.abs(np.delete(mags, 2)).max() < 1e-12

    def test_parseval(self):
        rng = np.random.default_rng(1)
        samples = rng.normal(size=128) + 1j * rng.normal(size=128)
        data = to_fft(ComplexSignal(samples, 1e-6)).data
        spectrum_energy = np.sum(data[0] ** 2 + data[1] ** 2)
        assert spectrum_energy == pytest.approx(128 * np.sum(np.abs(samples) ** 2), rel=1e-9)

    def test_pure_tone_bin(self):
        n = 64
        tone = ComplexSignal(np.exp(2j * np.pi * 5 * np.arange(n) / n), 1e-6)
        data = to_fft(tone).data
        mags = np.abs(data[0] + 1j * data[1])
        peak = n // 2 + 5
        assert mags[peak] == pytest.approx(n, rel=1e-12)
        assert np.delete(mags, peak).max() < 1e-9 * n

    def test_matches_direct_dft_oracle(self):
        rng = np.random.default_rng(2)
        for n in (16, 257, 512):
            samples = rng.normal(size=n) + 1j * rng.normal(size=n)
            data = to_fft(ComplexSignal(samples, 1e-6)).data
            expected = np.fft.fftshift(dft_oracle(samples))
            got = data[0] + 1j * data[1]
            np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-9 * np.abs(expected).max())


class TestToSpectrogram:
    def test_paper_shape(self):
        pre = preamble_sequence(params())
        assert len(pre) == 8192
        mat = to_spectrogram(pre).data
        assert mat.shape == (256, 63)

    def test_column_count_formula(self):
        assert spectrogram_columns(8192, 256, 128) == 63
        assert spectrogram_columns(256, 256, 128) == 1
        with pytest.raises(ShapeError):
            spectrogram_columns(100, 256, 128)

    def test_chirp_ridge_tracks_analytic_ramp(self):
        # per-column argmax bin follows the chirp's frequency ramp
        p = params()
        chirp = basic_chirp(p)  # 1024 samples
        M, R = 256, 128
        mat = to_spectrogram(chirp, M, R, standardize=False).data
        ridge_bins = mat.argmax(axis=0)
        freq_axis = np.fft.fftshift(np.fft.fftfreq(M, d=p.ts))
        bin_width = 1.0 / (M * p.ts)
        T = p.symbol_duration
        for m, b in enumerate(ridge_bins):
            t_mid = (m * R + M / 2) * p.ts
            f_expected = -p.bw / 2 + (p.bw / T) * t_mid
            assert abs(freq_axis[b] - f_expected) <= 2 * bin_width

    def test_zero_signal_hits_floor(self):
        sig = ComplexSignal(np.zeros(512, dtype=complex), 1e-6)
        mat = to_spectrogram(sig, 256, 128).data
        np.testing.assert_allclose(mat, 10 * np.log10(LOG_FLOOR))

    def test_standardized_moments(self):
        pre = preamble_sequence(params(n_preambles=2))
        mat = to_spectrogram(pre).data
        assert abs(mat.mean()) < 1e-9
        assert mat.std() == pytest.approx(1.0, abs=1e-9)

    def test_power_nonnegative_via_floor(self):
        rng = np.random.default_rng(3)
        sig = ComplexSignal(rng.normal(size=1024) + 1j * rng.normal(size=1024), 1e-6)
        mat = to_spectrogram(sig, 128, 64, standardize=False).data
        # dB of (power + floor) can never drop below the floor itself
        assert mat.min() >= 10 * np.log10(LOG_FLOOR) - 1e-12

    def test_time_shift_moves_columns(self):
        rng = np.random.default_rng(4)
        samples = rng.normal(size=2048) + 1j * rng.normal(size=2048)
        M, R = 256, 128
        a = to_spectrogram(ComplexSignal(samples, 1e-6), M, R, standardize=False).data
        b = to_spectrogram(ComplexSignal(samples[R:], 1e-6), M, R, standardize=False).data
        np.testing.assert_allclose(a[:, 1 : b.shape[1] + 1], b, rtol=1e-9, atol=1e-9)

    def test_frequency_shift_rolls_bins(self):
        # offset of k/(M*ts) Hz cyclically shifts every column by k bins
        rng = np.random.default_rng(5)
        ts = 1e-6
        samples = rng.normal(size=1024) + 1j * rng.normal(size=1024)
        M, R, k = 128, 64, 3
        shift = np.exp(2j * np.pi * (k / (M * ts)) * np.arange(1024) * ts)
        a = to_spectrogram(ComplexSignal(samples, ts), M, R, standardize=False).data
        b = to_spectrogram(ComplexSignal(samples * shift, ts), M, R, standardize=False).data
        np.testing.assert_allclose(np.roll(a, k, axis=0), b, rtol=1e-9, atol=1e-9)

    def test_matches_direct_dft_oracle(self):
        rng = np.random.default_rng(6)
        samples = rng.normal(size=512) + 1j * rng.normal(size=512)
        M, R = 64, 32
        mat = to_spectrogram(ComplexSignal(samples, 1e-6), M, R, standardize=False).data
        for m in range(mat.shape[1]):
            frame = samples[m * R : m * R + M]
            power = np.abs(np.fft.fftshift(dft_oracle(frame))) ** 2
            np.testing.assert_allclose(mat[:, m], 10 * np.log10(power + LOG_FLOOR), rtol=1e-9)


class TestRepresent:
    def test_shapes(self):
        pre = preamble_sequence(params())
        assert represent(pre, "iq").shape == (2, 8192)
        assert represent(pre, "fft").shape == (2, 8192)
        assert represent(pre, "spectrogram").shape == (256, 63)

    def test_shape_helper_agrees(self):
        for kind in ("iq", "fft", "spectrogram"):
            pre = preamble_sequence(params())
            assert represent(pre, kind).shape == representation_shape(kind, 8192)

    def test_unknown_kind(self):
        pre = preamble_sequence(params(n_preambles=2))
        with pytest.raises(ConfigurationError):
            represent(pre, "wavelet")
