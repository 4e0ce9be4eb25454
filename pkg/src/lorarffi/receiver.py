"""Receiver chain: synchronization, two-stage CFO estimation, normalization.

Coarse stage: the mean instantaneous frequency of an up-chirp equals the
CFO plus a known ramp constant, so subtracting the constant estimates the
offset over the full oscillator range. Fine stage: the phase of the
correlation between adjacent preamble repeats resolves the residual down
to fractions of a Hz, but only inside +/- B / 2^(SF+1) before wrapping.
"""

from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

from .errors import DegenerateInputError, NoPacketError, ShapeError
from .phy import ComplexSignal, LoRaParams, basic_chirp, instantaneous_frequency

__all__ = [
    "CfoEstimate",
    "SyncResult",
    "synchronize",
    "coarse_cfo",
    "fine_cfo",
    "fine_cfo_limit",
    "compensate",
    "estimate_and_compensate",
    "normalize",
]


@dataclass(frozen=True)
class CfoEstimate:
    """Two-stage CFO estimate; total is always coarse + fine."""

    coarse: float
    fine: float

    @property
    def total(self) -> float:
        return self.coarse + self.fine


@dataclass(frozen=True)
class SyncResult:
    offset: int
    confidence: float


def fine_cfo_limit(params: LoRaParams) -> float:
    """Unambiguous range of the fine estimator: B / 2^(SF+1) Hz."""
    return params.bw / 2.0 ** (params.sf + 1)


def synchronize(
    signal: ComplexSignal,
    params: LoRaParams,
    confidence_floor: float = 0.5,
    assume_aligned: bool = False,
) -> SyncResult:
    """Locate the preamble start by correlating against one ideal chirp.

    The normalized cross-correlation magnitude (in [0, 1]) against a single
    basic chirp is searched over every feasible start. With
    ``assume_aligned`` (packets straight out of the simulator) the search is
    skipped: offset 0 is returned with the lag-0 correlation as confidence
    and no floor check, since a large CFO legitimately decorrelates the
    ideal template.
    """
    L = params.symbol_length
    need = params.preamble_length
    if len(signal) < need:
        raise ShapeError(f"signal of {len(signal)} samples is shorter than a preamble ({need})")

    chirp = basic_chirp(params).samples
    x = signal.samples
    chirp_energy = float(np.sum(np.abs(chirp) ** 2))

    if assume_aligned:
        window = x[:L]
        denom = np.sqrt(chirp_energy * float(np.sum(np.abs(window) ** 2)))
        conf = abs(np.vdot(chirp, window)) / denom if denom > 0 else 0.0
        return SyncResult(0, float(min(conf, 1.0)))

    # full cross-correlation via FFT, then energy-normalize per lag
    corr = sp_signal.fftconvolve(x, np.conj(chirp[::-1]), mode="valid")
    window_energy = np.convolve(np.abs(x) ** 2, np.ones(L), mode="valid")
    denom = np.sqrt(chirp_energy * window_energy)
    with np.errstate(divide="ignore", invalid="ignore"):
        ncc = np.where(denom > 0, np.abs(corr) / denom, 0.0)
    ncc = np.minimum(ncc, 1.0)

    feasible = len(signal) - need + 1
    ncc = ncc[:feasible]
    offset = int(np.argmax(ncc))
    confidence = float(ncc[offset])
    if confidence < confidence_floor:
        raise NoPacketError(
            f"peak correlation {confidence:.3f} below the floor {confidence_floor:.3f}"
        )
    return SyncResult(offset, confidence)


def coarse_cfo(preambles: ComplexSignal, params: LoRaParams) -> float:
    """CFO from the mean instantaneous frequency of whole preamble symbols.

    The discriminator applied to an ideal chirp averages to -B/(2L) (the
    half-sample-shifted ramp mean), so that constant is subtracted to leave
    the offset alone. All whole symbols present are averaged.
    """
    L = params.symbol_length
    n_sym = len(preambles) // L
    if n_sym < 1:
        raise ShapeError(f"need at least one whole symbol ({L} samples), got {len(preambles)}")
    ramp_mean = -params.bw / (2.0 * L)
    x = preambles.samples
    means = []
    for k in range(n_sym):
        sym = ComplexSignal(x[k * L : (k + 1) * L], preambles.ts)
        means.append(float(np.mean(instantaneous_frequency(sym))))
    return float(np.mean(means)) - ramp_mean


def compensate(signal: ComplexSignal, f: float) -> ComplexSignal:
    """Rotate out a frequency offset: x[n] * exp(-j 2 pi f n ts)."""
    if f == 0.0:
        return signal
    n = np.arange(len(signal))
    return ComplexSignal(signal.samples * np.exp(-2j * np.pi * f * n * signal.ts), signal.ts)


def fine_cfo(preambles: ComplexSignal, params: LoRaParams) -> float:
    """Residual CFO from the phase between repeated preamble symbols.

    -angle( sum r'[n] conj(r'[n+L]) ) / (2 pi ts L), summed over every
    adjacent symbol pair to cut variance. Only resolves residuals inside
    +/- fine_cfo_limit(params); larger residuals alias.
    """
    L = params.symbol_length
    if len(preambles) < 2 * L:
        raise ShapeError(f"need at least two symbols ({2 * L} samples), got {len(preambles)}")
    x = preambles.samples
    n_sym = len(preambles) // L
    acc = 0.0 + 0.0j
    for k in range(n_sym - 1):
        a = x[k * L : (k + 1) * L]
        b = x[(k + 1) * L : (k + 2) * L]
        acc += np.sum(a * np.conj(b))
    return float(-np.angle(acc) / (2.0 * np.pi * preambles.ts * L))


def estimate_and_compensate(
    signal: ComplexSignal, params: LoRaParams
) -> tuple[ComplexSignal, CfoEstimate]:
    """Coarse estimate -> compensate -> fine estimate -> compensate."""
    coarse = coarse_cfo(signal, params)
    r1 = compensate(signal, coarse)
    fine = fine_cfo(r1, params)
    r2 = compensate(r1, fine)
    return r2, CfoEstimate(coarse=coarse, fine=fine)


def normalize(signal: ComplexSignal) -> ComplexSignal:
    """Divide by the RMS amplitude so the output has unit RMS."""
    rms = float(np.sqrt(np.mean(np.abs(signal.samples) ** 2)))
    if rms == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero signal")
    return ComplexSignal(signal.samples / rms, signal.ts)
