"""Virtual LoRa transmitters with hardware fingerprints.

Each simulated device carries three impairment families: a time-varying
carrier frequency offset (warm-up decay + per-session offset + per-packet
jitter), IQ modulator imbalance, and a memoryless third-order power
amplifier. Packets are emitted through an AWGN channel at a requested SNR.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .phy import ComplexSignal, LoRaParams, preamble_sequence

__all__ = [
    "DeviceProfile",
    "EmissionContext",
    "PacketRecord",
    "CaptureSchedule",
    "IDENTITY_IMPAIRMENTS",
    "cfo_at",
    "apply_impairments",
    "emit_packet",
    "sample_profiles",
    "packet_seed",
]

# ppm spec for cheap LoRa crystals; bounds |cfo_base| relative to fc
OSCILLATOR_PPM = 10.0

# rng stream tags so one integer seed drives independent draws
_TAG_JITTER = 0x4A49
_TAG_NOISE = 0x4E4F
_TAG_PHASE = 0x5048


@dataclass(frozen=True)
class DeviceProfile:
    """One virtual device's impairment fingerprint."""

    device_id: int
    cfo_base: float = 0.0  # Hz, long-term mean CFO
    cfo_warmup_amp: float = 0.0  # Hz, excess CFO right after power-on
    cfo_warmup_tau: float = 300.0  # s, warm-up decay constant
    cfo_day_sigma: float = 0.0  # Hz, per-session offset std-dev
    cfo_jitter_sigma: float = 0.0  # Hz, per-packet jitter std-dev
    iq_gain_mismatch: float = 1.0
    iq_phase_error: float = 0.0  # radians
    pa_a1: float = 1.0
    pa_a3: float = 0.0

    def __post_init__(self):
        if self.device_id < 0:
            raise ConfigurationError(f"device_id must be >= 0, got {self.device_id}")
        if self.cfo_warmup_tau <= 0:
            raise ConfigurationError(f"cfo_warmup_tau must be > 0, got {self.cfo_warmup_tau}")
        if self.cfo_day_sigma < 0 or self.cfo_jitter_sigma < 0:
            raise ConfigurationError("CFO sigmas must be >= 0")
        if self.pa_a1 <= 0:
            raise ConfigurationError(f"pa_a1 must be > 0, got {self.pa_a1}")
        if not 0.5 < self.iq_gain_mismatch < 2.0:
            raise ConfigurationError(
                f"iq_gain_mismatch must lie in (0.5, 2), got {self.iq_gain_mismatch}"
            )

    def validate_against(self, params: LoRaParams) -> None:
        limit = OSCILLATOR_PPM * 1e-6 * params.fc
        if abs(self.cfo_base) > limit:
            raise ConfigurationError(
                f"|cfo_base| = {abs(self.cfo_base):g} Hz exceeds "
                f"{OSCILLATOR_PPM:g} ppm of fc ({limit:g} Hz)"
            )


IDENTITY_IMPAIRMENTS = dict(
    cfo_base=0.0,
    cfo_warmup_amp=0.0,
    cfo_day_sigma=0.0,
    cfo_jitter_sigma=0.0,
    iq_gain_mismatch=1.0,
    iq_phase_error=0.0,
    pa_a1=1.0,
    pa_a3=0.0,
)


@dataclass(frozen=True)
class EmissionContext:
    """When and under what channel a packet is sent."""

    session_index: int  # the "day"
    elapsed: float  # seconds since device power-on
    snr_db: float = math.inf
    rng_seed: int = 0
    random_phase: bool = True  # receivers see an arbitrary carrier phase per packet

    def __post_init__(self):
        if self.elapsed < 0:
            raise ConfigurationError(f"elapsed must be >= 0, got {self.elapsed}")
        if self.session_index < 0:
            raise ConfigurationError(f"session_index must be >= 0, got {self.session_index}")


@dataclass(frozen=True)
class PacketRecord:
    """A received packet plus the ground truth that produced it."""

    signal: ComplexSignal
    true_device: int
    true_cfo: float
    context: EmissionContext


@dataclass(frozen=True)
class CaptureSchedule:
    """A capture plan: which sessions, how many packets, how often."""

    sessions: tuple = (1,)
    packets_per_session: int = 100
    interval_s: float = 1.0
    snr_db: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "sessions", tuple(int(s) for s in self.sessions))
        if len(self.sessions) == 0:
            raise ConfigurationError("schedule needs at least one session")
        if self.packets_per_session < 1:
            raise ConfigurationError("packets_per_session must be >= 1")
        if self.interval_s < 0:
            raise ConfigurationError("interval_s must be >= 0")


def _truncated_normal(rng: np.random.Generator, sigma: float, bound_sigmas: float = 5.0) -> float:
    if sigma == 0.0:
        return 0.0
    for _ in range(64):
        draw = rng.normal(0.0, sigma)
        if abs(draw) <= bound_sigmas * sigma:
            return float(draw)
    return float(np.clip(draw, -bound_sigmas * sigma, bound_sigmas * sigma))


def day_offset(profile: DeviceProfile, session_index: int) -> float:
    """Per-session CFO offset, a deterministic draw keyed by (device, session)."""
    rng = np.random.default_rng([profile.device_id, int(session_index)])
    return _truncated_normal(rng, profile.cfo_day_sigma)


def cfo_at(profile: DeviceProfile, context: EmissionContext) -> float:
    """Instantaneous CFO in Hz at the given emission context.

    cfo_base + per-session offset + warm-up decay + per-packet jitter. The
    warm-up term decays exponentially, reproducing the settle-after-power-on
    shape of cheap oscillators heating up.
    """
    warm = profile.cfo_warmup_amp * math.exp(-context.elapsed / profile.cfo_warmup_tau)
    jitter_rng = np.random.default_rng([context.rng_seed, _TAG_JITTER])
    jitter = _truncated_normal(jitter_rng, profile.cfo_jitter_sigma)
    return profile.cfo_base + day_offset(profile, context.session_index) + warm + jitter


def apply_impairments(clean: ComplexSignal, profile: DeviceProfile, cfo: float) -> ComplexSignal:
    """Push a clean baseband signal through one device's analog front end.

    Order: IQ imbalance, then the memoryless cubic PA, then the CFO phase
    ramp (the offset is a property of the carrier, applied last).
    """
    x = clean.samples
    i, q = x.real, x.imag
    y = i * profile.iq_gain_mismatch + 1j * (
        q * math.cos(profile.iq_phase_error) + i * math.sin(profile.iq_phase_error)
    )
    z = profile.pa_a1 * y + profile.pa_a3 * y * np.abs(y) ** 2
    if cfo != 0.0:
        n = np.arange(z.size)
        z = z * np.exp(2j * np.pi * cfo * n * clean.ts)
    return ComplexSignal(z, clean.ts)


def emit_packet(
    params: LoRaParams, profile: DeviceProfile, context: EmissionContext
) -> PacketRecord:
    """Synthesize one received packet: preamble -> impairments -> phase -> AWGN.

    Unless ``context.random_phase`` is disabled, the whole packet is rotated
    by a uniform random carrier phase, as seen by any non-coherent receiver.

    The emitted signal is aligned (no leading noise); the true CFO applied
    is re-sampled (jitter only) when it exceeds the soft envelope
    10 ppm * fc + 5 * (cfo_day_sigma + cfo_jitter_sigma).
    """
    profile.validate_against(params)
    clean = preamble_sequence(params)

    envelope = OSCILLATOR_PPM * 1e-6 * params.fc + 5.0 * (
        profile.cfo_day_sigma + profile.cfo_jitter_sigma
    )
    cfo = cfo_at(profile, context)
    reseed = context.rng_seed
    for _ in range(16):  # re-sample the stochastic part, then clamp
        if abs(cfo) <= envelope:
            break
        reseed += 1
        cfo = cfo_at(profile, replace(context, rng_seed=reseed))
    cfo = float(np.clip(cfo, -envelope, envelope))

    impaired = apply_impairments(clean, profile, cfo)
    samples = impaired.samples
    if context.random_phase:
        phase_rng = np.random.default_rng([context.rng_seed, _TAG_PHASE])
        samples = samples * np.exp(2j * np.pi * phase_rng.random())
    if math.isfinite(context.snr_db):
        power = float(np.mean(np.abs(samples) ** 2))
        noise_var = power / 10.0 ** (context.snr_db / 10.0)
        rng = np.random.default_rng([context.rng_seed, _TAG_NOISE])
        scale = math.sqrt(noise_var / 2.0)
        noise = rng.normal(0.0, scale, samples.size) + 1j * rng.normal(0.0, scale, samples.size)
        samples = samples + noise
    return PacketRecord(ComplexSignal(samples, params.ts), profile.device_id, cfo, context)


def packet_seed(master_seed: int, device_id: int, session_index: int, packet_index: int) -> int:
    """Stable per-packet rng seed derived from the master seed and position."""
    ss = np.random.SeedSequence([int(master_seed), int(device_id), int(session_index), int(packet_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_profiles(
    n_devices: int,
    params: LoRaParams,
    seed: int,
    cfo_day_sigma: float = 100.0,
    cfo_jitter_sigma: float = 10.0,
) -> list:
    """Draw a fleet of device fingerprints.

    cfo_base is uniform over the +/-10 ppm oscillator envelope (minus warm-up
    headroom), so some device pairs land close in CFO on purpose; IQ and PA
    coefficients get small device-unique perturbations.
    """
    if n_devices < 2:
        raise ConfigurationError("need at least 2 devices")
    rng = np.random.default_rng(seed)
    limit = OSCILLATOR_PPM * 1e-6 * params.fc
    profiles = []
    for dev in range(1, n_devices + 1):
        warmup = float(rng.uniform(100.0, 500.0))
        profiles.append(
            DeviceProfile(
                device_id=dev,
                cfo_base=float(rng.uniform(-(limit - warmup - 5 * cfo_day_sigma),
                                           limit - warmup - 5 * cfo_day_sigma)),
                cfo_warmup_amp=warmup,
                cfo_warmup_tau=float(rng.uniform(200.0, 600.0)),
                cfo_day_sigma=cfo_day_sigma,
                cfo_jitter_sigma=cfo_jitter_sigma,
                iq_gain_mismatch=float(rng.uniform(0.85, 1.15)),
                iq_phase_error=float(rng.uniform(-0.15, 0.15)),
                pa_a1=float(rng.uniform(0.9, 1.1)),
                pa_a3=float(rng.uniform(-0.2, -0.02)),
            )
        )
    return profiles
