"""Evaluation reports: confusion matrices, accuracies, CFO statistics."""

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError

__all__ = ["EvalReport", "confusion_accuracy"]


def confusion_accuracy(confusion: np.ndarray) -> float:
    total = confusion.sum()
    if total == 0:
        raise DatasetError("empty confusion matrix")
    return float(np.trace(confusion) / total)


@dataclass
class EvalReport:
    """Results of one evaluation run over a test selection."""

    class_ids: list
    representation: str
    classifier: str
    compensated: bool
    confusion: np.ndarray
    lambda_hz: float | None = None
    out_of_database_count: int = 0
    train_selection: str = ""
    test_selection: str = ""
    cfo_stats: list = field(default_factory=list)  # rows: device, session, mean/std est & true
    timestamp: str = ""

    @property
    def accuracy(self) -> float:
        return confusion_accuracy(self.confusion)

    def per_device_accuracy(self) -> dict:
        out = {}
        for i, dev in enumerate(self.class_ids):
            row = self.confusion[i]
            out[dev] = float(row[i] / row.sum()) if row.sum() else float("nan")
        return out

    def to_text(self) -> str:
        buf = io.StringIO()
        if self.timestamp:
            buf.write(f"# generated {self.timestamp}\n")
        buf.write(
            f"representation={self.representation} classifier={self.classifier} "
            f"compensated={self.compensated}"
        )
        if self.lambda_hz is not None:
            buf.write(f" lambda={self.lambda_hz:g} Hz")
        buf.write("\n")
        buf.write(f"train selection: {self.train_selection}\n")
        buf.write(f"test selection:  {self.test_selection}\n")
        buf.write(f"overall accuracy: {self.accuracy:.4f}\n")
        if self.out_of_database_count:
            buf.write(f"out-of-database fallbacks: {self.out_of_database_count}\n")
        buf.write("per-device accuracy:\n")
        for dev, acc in self.per_device_accuracy().items():
            buf.write(f"  device {dev}: {acc:.4f}\n")
        buf.write("confusion matrix (row = true, column = predicted):\n")
        header = "      " + " ".join(f"{d:>6d}" for d in self.class_ids)
        buf.write(header + "\n")
        for i, dev in enumerate(self.class_ids):
            row = " ".join(f"{int(v):>6d}" for v in self.confusion[i])
            buf.write(f"{dev:>5d} {row}\n")
        return buf.getvalue()

    def to_csv(self) -> str:
        """Machine-readable confusion matrix plus summary rows."""
        buf = io.StringIO()
        if self.timestamp:
            buf.write(f"# generated {self.timestamp}\n")
        buf.write("section,true_device,predicted_device,count\n")
        for i, ti in enumerate(self.class_ids):
            for j, pj in enumerate(self.class_ids):
                buf.write(f"confusion,{ti},{pj},{int(self.confusion[i, j])}\n")
        buf.write(f"summary,overall_accuracy,,{self.accuracy:.6f}\n")
        for dev, acc in self.per_device_accuracy().items():
            buf.write(f"summary,device_accuracy,{dev},{acc:.6f}\n")
        buf.write(f"summary,out_of_database,,{self.out_of_database_count}\n")
        return buf.getvalue()
