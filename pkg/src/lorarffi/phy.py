"""Ideal LoRa baseband chirp generation.

A LoRa preamble is a train of identical up-chirps sweeping the bandwidth B
over one symbol duration T = 2^SF / B. Everything downstream (device
simulation, receiver, representations) moves complex baseband around as
:class:`ComplexSignal`.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, PhaseUndefinedError, ShapeError

__all__ = [
    "LoRaParams",
    "ComplexSignal",
    "symbol_length",
    "basic_chirp",
    "preamble_sequence",
    "instantaneous_frequency",
]


@dataclass(frozen=True)
class LoRaParams:
    """LoRa PHY configuration.

    Attributes
    ----------
    sf : int
        Spreading factor, 7..12.
    bw : float
        Bandwidth B in Hz.
    fc : float
        Carrier frequency in Hz (used for CFO envelopes, not waveform math).
    ts : float
        Sample interval in seconds. 1/ts must be >= bw.
    n_preambles : int
        Repeated basic chirps per packet; at least 2.
    """

    sf: int
    bw: float
    fc: float
    ts: float
    n_preambles: int = 8

    def __post_init__(self):
        if not 7 <= self.sf <= 12:
            raise ConfigurationError(f"spreading factor must be in 7..12, got {self.sf}")
        if self.bw <= 0:
            raise ConfigurationError(f"bandwidth must be positive, got {self.bw}")
        if self.ts <= 0:
            raise ConfigurationError(f"sample interval must be positive, got {self.ts}")
        if 1.0 / self.ts < self.bw * (1.0 - 1e-12):
            raise ConfigurationError(
                f"sample rate 1/ts = {1.0 / self.ts:g} Hz is below the bandwidth {self.bw:g} Hz"
            )
        if self.n_preambles < 2:
            raise ConfigurationError(
                f"n_preambles must be >= 2 for fine CFO estimation, got {self.n_preambles}"
            )
        symbol_length(self)  # rejects non-integer symbol lengths

    @property
    def symbol_duration(self) -> float:
        """Symbol duration T = 2^SF / B in seconds."""
        return 2.0**self.sf / self.bw

    @property
    def symbol_length(self) -> int:
        return symbol_length(self)

    @property
    def preamble_length(self) -> int:
        return self.n_preambles * symbol_length(self)


@dataclass(frozen=True)
class ComplexSignal:
    """A finite complex baseband sample sequence with its sample interval."""

    samples: np.ndarray
    ts: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ShapeError("samples must be a non-empty 1-D sequence")
        if self.ts <= 0:
            raise ConfigurationError(f"sample interval must be positive, got {self.ts}")
        if not np.all(np.isfinite(samples)):
            raise ShapeError("samples contain NaN or Inf")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size


def symbol_length(params: LoRaParams) -> int:
    """Samples per symbol, L = 2^SF / (B * ts). Must be an exact integer."""
    exact = 2.0**params.sf / (params.bw * params.ts)
    rounded = round(exact)
    if rounded <= 0 or abs(exact - rounded) > 1e-6:
        raise ConfigurationError(
            f"2^{params.sf} / ({params.bw:g} Hz * {params.ts:g} s) = {exact:g} "
            "is not a positive integer symbol length"
        )
    return rounded


def basic_chirp(params: LoRaParams, amplitude: float = 1.0) -> ComplexSignal:
    """One ideal baseband up-chirp, L samples at t = n*ts.

    The phase is -pi*B*t + pi*(B/T)*t^2, sweeping the instantaneous
    frequency linearly from -B/2 toward +B/2 over one symbol.
    """
    if amplitude <= 0:
        raise ConfigurationError(f"amplitude must be positive, got {amplitude}")
    L = symbol_length(params)
    t = np.arange(L) * params.ts
    rate = params.bw / params.symbol_duration
    phase = -np.pi * params.bw * t + np.pi * rate * t**2
    return ComplexSignal(amplitude * np.exp(1j * phase), params.ts)


def preamble_sequence(params: LoRaParams, amplitude: float = 1.0) -> ComplexSignal:
    """n_preambles identical basic chirps back to back."""
    chirp = basic_chirp(params, amplitude)
    return ComplexSignal(np.tile(chirp.samples, params.n_preambles), params.ts)


def instantaneous_frequency(signal: ComplexSignal) -> np.ndarray:
    """Per-sample frequency from the phase-difference discriminator.

    Returns len(signal) - 1 values f[n] = angle(x[n+1] * conj(x[n])) / (2*pi*ts),
    each in [-1/(2 ts), 1/(2 ts)). Exact for a noiseless chirp.
    """
    x = signal.samples
    if x.size < 2:
        raise ShapeError("need at least 2 samples to measure frequency")
    mags = np.abs(x)
    zero = np.flatnonzero(mags == 0.0)
    if zero.size:
        raise PhaseUndefinedError(f"zero-magnitude sample at index {zero[0]}")
    return np.angle(x[1:] * np.conj(x[:-1])) / (2.0 * np.pi * signal.ts)
