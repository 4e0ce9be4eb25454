"""Walk through the signal model: one chirp, a preamble, three views of it.

Run:  python3 demos/01_chirp_and_spectrogram.py
"""
import numpy as np

from lorarffi import (
    LoRaParams,
    basic_chirp,
    instantaneous_frequency,
    preamble_sequence,
    represent,
    to_spectrogram,
)

params = LoRaParams(sf=7, bw=125e3, fc=868.1e6, ts=1e-6, n_preambles=8)
print(f"SF{params.sf} at {params.bw / 1e3:.0f} kHz, sampled at {1 / params.ts / 1e6:.0f} MS/s")
print(f"symbol: {params.symbol_length} samples / {params.symbol_duration * 1e3:.3f} ms")

# a single up-chirp sweeps -B/2 .. +B/2 linearly
chirp = basic_chirp(params)
freq = instantaneous_frequency(chirp)
print(f"chirp ramp: {freq[0] / 1e3:+.1f} kHz -> {freq[-1] / 1e3:+.1f} kHz "
      f"over {len(chirp)} samples")

# the preamble just repeats it; that repetition is what every later stage exploits
preamble = preamble_sequence(params)
print(f"preamble: {params.n_preambles} identical chirps, {len(preamble)} samples total")

# three classifier input formats from the same packet
for kind in ("iq", "fft", "spectrogram"):
    mat = represent(preamble, kind)
    print(f"  {kind:<12s} -> matrix {mat.shape}")

# the spectrogram ridge follows the analytic ramp, wrapping once per symbol
spec = to_spectrogram(preamble, window_len=256, hop=128, standardize=False)
ridge = spec.data.argmax(axis=0)
bin_hz = 1.0 / (256 * params.ts)
print("ridge bins (first 10 columns):", ridge[:10].tolist())
print(f"frequency resolution {bin_hz / 1e3:.2f} kHz/bin; "
      f"column spacing {128 * params.ts * 1e6:.0f} us")
print("column-to-column ridge steps:",
      np.unique(np.diff(ridge.astype(int)) % spec.data.shape[0])[:3].tolist(),
      "(constant slope, modulo the wrap)")
