"""On-disk dataset container.

Layout (all integers little-endian):

    bytes 0..7    magic ``b"LRFFIDS\\x00"``
    bytes 8..11   format version (uint32)
    bytes 12..19  manifest offset (uint64), patched after streaming
    records...    per packet: interleaved I,Q float32 samples
    manifest      UTF-8 JSON at the manifest offset, to end of file

The manifest carries the format version, LoRa parameters, the full device
profiles plus a digest over them, the capture schedule, the master seed and
a per-record index (device, session, elapsed, snr, true CFO, byte offset,
sample count). Records are written in generation order: session-major,
then device, then packet.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .devices import (
    CaptureSchedule,
    DeviceProfile,
    EmissionContext,
    emit_packet,
    packet_seed,
)
from .errors import DatasetError
from .phy import ComplexSignal, LoRaParams

__all__ = [
    "FORMAT_VERSION",
    "RecordMeta",
    "DatasetReader",
    "generate_dataset",
    "profiles_digest",
]

MAGIC = b"LRFFIDS\x00"
FORMAT_VERSION = 1
_HEADER_LEN = 8 + 4 + 8


@dataclass(frozen=True)
class RecordMeta:
    device: int
    session: int
    elapsed: float
    snr_db: float
    true_cfo: float
    offset: int
    n_samples: int


def profiles_digest(profiles) -> str:
    blob = json.dumps([asdict(p) for p in profiles], sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_header(fh, manifest_offset: int) -> None:
    fh.write(MAGIC)
    fh.write(np.uint32(FORMAT_VERSION).tobytes())
    fh.write(np.uint64(manifest_offset).tobytes())


def generate_dataset(
    params: LoRaParams,
    profiles: list,
    schedule: CaptureSchedule,
    master_seed: int,
    path: str,
) -> str:
    """Emit every scheduled packet and stream it into a container file.

    Fully deterministic in (params, profiles, schedule, master_seed): every
    packet derives its own rng seed from the master seed and its position.
    """
    if len(profiles) < 2:
        raise DatasetError("need at least 2 device profiles")
    ids = [p.device_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise DatasetError(f"duplicate device ids in profiles: {sorted(ids)}")
    for p in profiles:
        p.validate_against(params)

    records = []
    try:
        with open(path, "wb") as fh:
            _write_header(fh, 0)
            pos = _HEADER_LEN
            for session in schedule.sessions:
                for profile in profiles:
                    for i in range(schedule.packets_per_session):
                        ctx = EmissionContext(
                            session_index=session,
                            elapsed=i * schedule.interval_s,
                            snr_db=schedule.snr_db,
                            rng_seed=packet_seed(master_seed, profile.device_id, session, i),
                        )
                        packet = emit_packet(params, profile, ctx)
                        blob = _pack_record(packet.signal)
                        fh.write(blob)
                        records.append(
                            RecordMeta(
                                device=profile.device_id,
                                session=session,
                                elapsed=ctx.elapsed,
                                snr_db=ctx.snr_db,
                                true_cfo=packet.true_cfo,
                                offset=pos,
                                n_samples=len(packet.signal),
                            )
                        )
                        pos += len(blob)
            manifest = {
                "format_version": FORMAT_VERSION,
                "params": asdict(params),
                "profiles": [asdict(p) for p in profiles],
                "profiles_digest": profiles_digest(profiles),
                "schedule": asdict(schedule),
                "master_seed": int(master_seed),
                "records": [asdict(r) for r in records],
            }
            fh.write(json.dumps(manifest, sort_keys=True).encode())
            fh.seek(12)
            fh.write(np.uint64(pos).tobytes())
    except OSError as exc:
        raise DatasetError(f"failed writing dataset to {path}: {exc}") from exc
    return path


def _pack_record(signal: ComplexSignal) -> bytes:
    interleaved = np.empty(2 * len(signal), dtype="<f4")
    interleaved[0::2] = signal.samples.real
    interleaved[1::2] = signal.samples.imag
    return interleaved.tobytes()


class DatasetReader:
    """Random access over a container file; records decode lazily."""

    def __init__(self, path: str):
        self.path = path
        try:
            self._fh = open(path, "rb")
        except OSError as exc:
            raise DatasetError(f"cannot open dataset {path}: {exc}") from exc
        head = self._fh.read(_HEADER_LEN)
        if len(head) != _HEADER_LEN or head[:8] != MAGIC:
            raise DatasetError(f"{path} is not a lorarffi dataset container")
        version = int(np.frombuffer(head[8:12], dtype="<u4")[0])
        if version != FORMAT_VERSION:
            raise DatasetError(
                f"{path}: unsupported format version {version} (expected {FORMAT_VERSION})"
            )
        manifest_offset = int(np.frombuffer(head[12:20], dtype="<u8")[0])
        self._fh.seek(manifest_offset)
        manifest = json.loads(self._fh.read().decode())
        self.manifest = manifest
        self.params = LoRaParams(**manifest["params"])
        self.profiles = [DeviceProfile(**p) for p in manifest["profiles"]]
        self.schedule = CaptureSchedule(**manifest["schedule"])
        self.master_seed = manifest["master_seed"]
        self.records = [RecordMeta(**r) for r in manifest["records"]]
        if manifest["profiles_digest"] != profiles_digest(self.profiles):
            raise DatasetError(f"{path}: profile digest mismatch")
        expected = self.params.preamble_length
        for i, rec in enumerate(self.records):
            if rec.n_samples < expected:
                raise DatasetError(
                    f"{path}: record {i} has {rec.n_samples} samples, expected >= {expected}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        self._fh.close()

    def device_ids(self) -> list:
        return sorted({r.device for r in self.records})

    def signal(self, index: int) -> ComplexSignal:
        rec = self.records[index]
        self._fh.seek(rec.offset)
        raw = np.frombuffer(self._fh.read(8 * rec.n_samples), dtype="<f4")
        if raw.size != 2 * rec.n_samples:
            raise DatasetError(f"{self.path}: truncated record {index}")
        return ComplexSignal(
            raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64), self.params.ts
        )

    def select(self, session: int | None = None, device: int | None = None) -> list:
        """Indices matching the filters, in file order."""
        out = []
        for i, r in enumerate(self.records):
            if session is not None and r.session != session:
                continue
            if device is not None and r.device != device:
                continue
            out.append(i)
        return out
