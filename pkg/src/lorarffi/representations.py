"""CNN input representations: raw IQ, DC-centered FFT, log spectrogram.

All frequency axes are DC-centered. The spectrogram uses a rectangular
window (defaults M=256, R=128), squared magnitudes, dB compression with a
1e-12 floor, and per-matrix standardization for CNN conditioning.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError
from .phy import ComplexSignal

__all__ = [
    "IqMatrix",
    "FftMatrix",
    "SpectrogramMatrix",
    "to_iq",
    "to_fft",
    "to_spectrogram",
    "represent",
    "representation_shape",
    "LOG_FLOOR",
    "DEFAULT_WINDOW_LEN",
    "DEFAULT_HOP",
]

LOG_FLOOR = 1e-12
DEFAULT_WINDOW_LEN = 256
DEFAULT_HOP = 128

REPRESENTATIONS = ("iq", "fft", "spectrogram")


@dataclass(frozen=True)
class IqMatrix:
    """2 x N real matrix; row 0 real parts, row 1 imaginary parts."""

    data: np.ndarray


@dataclass(frozen=True)
class FftMatrix:
    """2 x N real matrix of the DC-centered DFT, split real/imaginary."""

    data: np.ndarray


@dataclass(frozen=True)
class SpectrogramMatrix:
    """M x C log-compressed magnitude-squared time-frequency matrix."""

    data: np.ndarray


def _check_length(signal: ComplexSignal, expected_len: int | None) -> np.ndarray:
    x = signal.samples
    if expected_len is not None and x.size != expected_len:
        raise ShapeError(f"expected {expected_len} samples, got {x.size}")
    return x


def to_iq(signal: ComplexSignal, expected_len: int | None = None) -> IqMatrix:
    x = _check_length(signal, expected_len)
    return IqMatrix(np.vstack([x.real, x.imag]))


def to_fft(signal: ComplexSignal, expected_len: int | None = None) -> FftMatrix:
    x = _check_length(signal, expected_len)
    spectrum = np.fft.fftshift(np.fft.fft(x))
    return FftMatrix(np.vstack([spectrum.real, spectrum.imag]))


def spectrogram_columns(n_samples: int, window_len: int, hop: int) -> int:
    """C = floor((N - M) / R) + 1; trailing partial windows are dropped."""
    if window_len > n_samples:
        raise ShapeError(f"window length {window_len} exceeds signal length {n_samples}")
    return (n_samples - window_len) // hop + 1


def to_spectrogram(
    signal: ComplexSignal,
    window_len: int = DEFAULT_WINDOW_LEN,
    hop: int = DEFAULT_HOP,
    standardize: bool = True,
) -> SpectrogramMatrix:
    """Rectangular-window STFT magnitude-squared, dB-compressed.

    Column m holds the DC-centered |DFT|^2 of samples [m*hop, m*hop + M),
    mapped through 10*log10(. + 1e-12). With ``standardize`` the matrix is
    shifted/scaled to zero mean and unit variance (skipped for constant
    matrices, e.g. an all-zero signal, which stays at the log floor).
    """
    if window_len < 1 or hop < 1:
        raise ConfigurationError("window_len and hop must be positive")
    x = signal.samples
    n_cols = spectrogram_columns(x.size, window_len, hop)
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[:: hop][:n_cols]
    spectra = np.fft.fftshift(np.fft.fft(frames, axis=1), axes=1)
    power = np.abs(spectra) ** 2
    mat = 10.0 * np.log10(power + LOG_FLOOR).T  # rows = frequency bins, cols = time
    if standardize:
        std = float(mat.std())
        if std > 0.0:
            mat = (mat - mat.mean()) / std
    return SpectrogramMatrix(np.ascontiguousarray(mat))


def representation_shape(kind: str, n_samples: int,
                         window_len: int = DEFAULT_WINDOW_LEN,
                         hop: int = DEFAULT_HOP) -> tuple[int, int]:
    if kind in ("iq", "fft"):
        return (2, n_samples)
    if kind == "spectrogram":
        return (window_len, spectrogram_columns(n_samples, window_len, hop))
    raise ConfigurationError(f"unknown representation {kind!r}; expected one of {REPRESENTATIONS}")


def represent(
    signal: ComplexSignal,
    kind: str,
    expected_len: int | None = None,
    window_len: int = DEFAULT_WINDOW_LEN,
    hop: int = DEFAULT_HOP,
) -> np.ndarray:
    """Dispatch to the named representation; returns the raw 2-D array."""
    if kind == "iq":
        return to_iq(signal, expected_len).data
    if kind == "fft":
        return to_fft(signal, expected_len).data
    if kind == "spectrogram":
        _check_length(signal, expected_len)
        return to_spectrogram(signal, window_len, hop).data
    raise ConfigurationError(f"unknown representation {kind!r}; expected one of {REPRESENTATIONS}")
