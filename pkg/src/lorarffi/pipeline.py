"""End-to-end orchestration: dataset -> receiver chain -> features -> model.

Every packet passes through the same chain: CFO estimation (always, so the
reference database can be populated), optional compensation, then RMS
normalization. The compensation mode is baked into the checkpoint and
enforced at evaluation time; mixing modes between train and test silently
destroys accuracy, so it is refused.
"""

import datetime as _dt

import numpy as np

from .classify import (
    CfoDatabase,
    TrainConfig,
    TrainResult,
    predict_cnn,
    predict_hybrid,
    train,
)
from .dataset import DatasetReader
from .errors import ConfigurationError, DatasetError
from .phy import ComplexSignal, LoRaParams
from .receiver import CfoEstimate, estimate_and_compensate, normalize
from .report import EvalReport
from .representations import represent, representation_shape

__all__ = [
    "process_packet",
    "build_features",
    "train_on_dataset",
    "evaluate",
    "cfo_report_rows",
    "training_selection",
    "test_selection",
]


def process_packet(
    signal: ComplexSignal, params: LoRaParams, compensate: bool
) -> tuple[ComplexSignal, CfoEstimate]:
    """Receiver chain on an aligned packet: estimate, (compensate,) normalize."""
    compensated, estimate = estimate_and_compensate(signal, params)
    out = compensated if compensate else signal
    return normalize(out), estimate


def build_features(
    reader: DatasetReader,
    indices,
    representation: str,
    compensate: bool,
    window_len: int = 256,
    hop: int = 128,
):
    """(X, labels, estimated total CFOs) for the selected records."""
    params = reader.params
    shape = representation_shape(representation, params.preamble_length, window_len, hop)
    n = len(indices)
    X = np.empty((n, shape[0], shape[1]), dtype=np.float32)
    labels = np.empty(n, dtype=np.int64)
    cfos = np.empty(n, dtype=np.float64)
    for row, idx in enumerate(indices):
        sig = reader.signal(idx)
        processed, estimate = process_packet(sig, params, compensate)
        X[row] = represent(
            processed,
            representation,
            expected_len=params.preamble_length,
            window_len=window_len,
            hop=hop,
        )
        labels[row] = reader.records[idx].device
        cfos[row] = estimate.total
    return X, labels, cfos


def training_selection(reader: DatasetReader, session: int, train_count: int) -> list:
    """The first ``train_count`` packets of each device in one session."""
    indices = []
    for device in reader.device_ids():
        per_dev = reader.select(session=session, device=device)
        if len(per_dev) < train_count:
            raise DatasetError(
                f"device {device} has only {len(per_dev)} packets in session {session}, "
                f"need {train_count}"
            )
        indices.extend(per_dev[:train_count])
    return indices


def test_selection(
    reader: DatasetReader, session: int, start: int, count: int | None = None
) -> list:
    """Packets [start, start+count) of each device in one session."""
    indices = []
    for device in reader.device_ids():
        per_dev = reader.select(session=session, device=device)
        chunk = per_dev[start:] if count is None else per_dev[start : start + count]
        if not chunk:
            raise DatasetError(
                f"device {device}: empty test selection (session {session}, start {start})"
            )
        indices.extend(chunk)
    return indices


def train_on_dataset(
    reader: DatasetReader,
    representation: str,
    compensate: bool,
    cfg: TrainConfig,
    session: int | None = None,
    train_count: int | None = None,
    lambda_hz: float = 200.0,
    window_len: int = 256,
    hop: int = 128,
    kernel_width: int = 128,
    verbose: bool = False,
) -> tuple[TrainResult, list]:
    session = session if session is not None else reader.schedule.sessions[0]
    if train_count is None:
        per_dev = min(
            len(reader.select(session=session, device=d)) for d in reader.device_ids()
        )
        train_count = per_dev // 2
    indices = training_selection(reader, session, train_count)
    X, labels, cfos = build_features(
        reader, indices, representation, compensate, window_len=window_len, hop=hop
    )
    kind = "spectrogram" if representation == "spectrogram" else "iq"
    result = train(
        X, labels, cfos, kind, cfg, lambda_hz=lambda_hz,
        kernel_width=kernel_width, verbose=verbose,
    )
    return result, indices


def evaluate(
    model,
    db: CfoDatabase,
    header: dict,
    reader: DatasetReader,
    indices,
    classifier: str = "cnn",
    lambda_hz: float | None = None,
    train_indices=None,
) -> EvalReport:
    """Run the full chain over a test selection and accumulate the report."""
    if classifier not in ("cnn", "hybrid"):
        raise ConfigurationError(f"unknown classifier {classifier!r}")
    params = reader.params
    expected = LoRaParams(**header["params"])
    if expected != params:
        raise DatasetError("checkpoint and dataset disagree on LoRa parameters")
    unknown = set(reader.records[i].device for i in indices) - set(model.class_ids)
    if unknown:
        raise DatasetError(f"dataset contains devices unknown to the checkpoint: {sorted(unknown)}")
    if train_indices is not None and set(indices) & set(train_indices):
        raise DatasetError("test selection overlaps the training selection")

    if lambda_hz is not None:
        db = CfoDatabase(references=db.references, threshold=lambda_hz)
    compensate = bool(header["compensated"])
    extra = header.get("extra", {})
    window_len = int(extra.get("window_len", 256))
    hop = int(extra.get("hop", 128))
    k = len(model.class_ids)
    idx_of = {c: i for i, c in enumerate(model.class_ids)}
    confusion = np.zeros((k, k), dtype=np.int64)
    out_of_db = 0
    cfo_by_dev_session: dict = {}
    for i in indices:
        rec = reader.records[i]
        processed, estimate = process_packet(reader.signal(i), params, compensate)
        x = represent(
            processed,
            header["representation"],
            expected_len=params.preamble_length,
            window_len=window_len,
            hop=hop,
        )
        if classifier == "hybrid":
            pred = predict_hybrid(model, x, estimate.total, db)
            label = pred.label
            out_of_db += int(pred.out_of_database)
        else:
            label, _ = predict_cnn(model, x)
        confusion[idx_of[rec.device], idx_of[label]] += 1
        cfo_by_dev_session.setdefault((rec.device, rec.session), []).append(
            (estimate.total, rec.true_cfo)
        )

    stats = []
    for (dev, session), pairs in sorted(cfo_by_dev_session.items()):
        arr = np.asarray(pairs)
        stats.append(
            {
                "device": dev,
                "session": session,
                "mean_est": float(arr[:, 0].mean()),
                "std_est": float(arr[:, 0].std()),
                "mean_true": float(arr[:, 1].mean()),
            }
        )
    return EvalReport(
        class_ids=list(model.class_ids),
        representation=header["representation"],
        classifier=classifier,
        compensated=compensate,
        confusion=confusion,
        lambda_hz=db.threshold if classifier == "hybrid" else None,
        out_of_database_count=out_of_db,
        train_selection=str(header.get("extra", {}).get("train_selection", "")),
        test_selection=f"{len(indices)} packets",
        cfo_stats=stats,
        timestamp=_dt.datetime.now().isoformat(timespec="seconds"),
    )


def cfo_report_rows(reader: DatasetReader) -> list:
    """Per-packet CFO estimates for the whole dataset, plot-ready.

    Rows: device, session, elapsed, true_cfo, coarse, fine, total, error.
    """
    rows = []
    for i, rec in enumerate(reader.records):
        _, estimate = estimate_and_compensate(reader.signal(i), reader.params)
        rows.append(
            {
                "device": rec.device,
                "session": rec.session,
                "elapsed": rec.elapsed,
                "true_cfo": rec.true_cfo,
                "coarse": estimate.coarse,
                "fine": estimate.fine,
                "total": estimate.total,
                "error": estimate.total - rec.true_cfo,
            }
        )
    return rows
