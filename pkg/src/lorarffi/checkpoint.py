"""Model checkpoint container.

Layout (integers little-endian):

    bytes 0..7    magic ``b"LRFFICK\\x00"``
    bytes 8..11   format version (uint32)
    bytes 12..19  header length H (uint64)
    bytes 20..    UTF-8 JSON header of H bytes
    then          parameter/buffer blobs, float32 little-endian, in the
                  exact order listed by the header's ``tensors`` manifest

The header records the architecture (kind, input shape, class ids, kernel
width), the representation and compensation mode the model was trained
with, the LoRa parameters, the CFO database, and a manifest of every
tensor (layer index, param/buffer name, shape).
"""

import json
from dataclasses import asdict

import numpy as np

from .classify import CfoDatabase
from .cnn import Cnn, build_model
from .errors import DatasetError
from .phy import LoRaParams

__all__ = ["FORMAT_VERSION", "save_checkpoint", "load_checkpoint"]

MAGIC = b"LRFFICK\x00"
FORMAT_VERSION = 1


def _tensor_items(model: Cnn):
    for li, layer in enumerate(model.layers):
        for kind, store in (("param", layer.params), ("buffer", layer.buffers)):
            for name in sorted(store):
                yield li, kind, name, store[name]


def save_checkpoint(
    path: str,
    model: Cnn,
    db: CfoDatabase,
    representation: str,
    compensated: bool,
    params: LoRaParams,
    extra: dict | None = None,
) -> str:
    tensors = [
        {"layer": li, "kind": kind, "name": name, "shape": list(arr.shape)}
        for li, kind, name, arr in _tensor_items(model)
    ]
    header = {
        "format_version": FORMAT_VERSION,
        "model_kind": model.kind,
        "input_shape": list(model.input_shape),
        "n_classes": model.n_classes,
        "class_ids": list(model.class_ids),
        "kernel_width": model.kernel_width,
        "representation": representation,
        "compensated": bool(compensated),
        "params": asdict(params),
        "cfo_database": {
            "references": {str(k): v for k, v in db.references.items()},
            "threshold": db.threshold,
        },
        "tensors": tensors,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(np.uint32(FORMAT_VERSION).tobytes())
            fh.write(np.uint64(len(blob)).tobytes())
            fh.write(blob)
            for _, _, _, arr in _tensor_items(model):
                fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    except OSError as exc:
        raise DatasetError(f"failed writing checkpoint to {path}: {exc}") from exc
    return path


def load_checkpoint(path: str):
    """Rebuild (model, db, header) from a checkpoint file."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(20)
            if len(head) != 20 or head[:8] != MAGIC:
                raise DatasetError(f"{path} is not a lorarffi checkpoint")
            version = int(np.frombuffer(head[8:12], dtype="<u4")[0])
            if version != FORMAT_VERSION:
                raise DatasetError(
                    f"{path}: unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
                )
            hlen = int(np.frombuffer(head[12:20], dtype="<u8")[0])
            header = json.loads(fh.read(hlen).decode())
            model = build_model(
                header["model_kind"],
                tuple(header["input_shape"]),
                header["n_classes"],
                kernel_width=header["kernel_width"] or 128,
            )
            model.class_ids = list(header["class_ids"])
            stores = {
                (li, kind, name): (layer.params if kind == "param" else layer.buffers, name)
                for li, layer in enumerate(model.layers)
                for kind, store in (("param", layer.params), ("buffer", layer.buffers))
                for name in store
            }
            for spec in header["tensors"]:
                key = (spec["layer"], spec["kind"], spec["name"])
                if key not in stores:
                    raise DatasetError(f"{path}: unexpected tensor {key} in manifest")
                shape = tuple(spec["shape"])
                count = int(np.prod(shape)) if shape else 1
                raw = np.frombuffer(fh.read(4 * count), dtype="<f4")
                if raw.size != count:
                    raise DatasetError(f"{path}: truncated tensor {key}")
                store, name = stores[key]
                store[name] = raw.reshape(shape).astype(np.float32)
    except OSError as exc:
        raise DatasetError(f"cannot read checkpoint {path}: {exc}") from exc
    db = CfoDatabase(
        references={int(k): float(v) for k, v in header["cfo_database"]["references"].items()},
        threshold=float(header["cfo_database"]["threshold"]),
    )
    return model, db, header
