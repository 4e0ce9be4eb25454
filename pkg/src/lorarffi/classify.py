"""Training loop, softmax prediction, and the CFO-gated hybrid classifier.

Training uses Adam with a step-decay learning rate (defaults: 3e-4 initial,
x0.3 every 10 epochs, batch 32) and a 90/10 train/validation split.
Alongside the network, a per-device CFO database (the mean estimated CFO of
each device's training packets) is populated; the hybrid classifier zeroes
the softmax probability of any device whose reference CFO is farther than a
threshold from the packet's estimated CFO.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .cnn import Cnn, build_model, softmax
from .errors import DatabaseIntegrityError, DatasetError, DivergenceError
from .representations import REPRESENTATIONS

__all__ = [
    "TrainConfig",
    "CfoDatabase",
    "TrainResult",
    "Adam",
    "learning_rate_at",
    "train",
    "forward",
    "predict_cnn",
    "predict_hybrid",
    "HybridPrediction",
    "DEFAULT_LAMBDA_HZ",
]

DEFAULT_LAMBDA_HZ = 200.0


@dataclass
class TrainConfig:
    initial_lr: float = 3e-4
    lr_drop_period: int = 10
    lr_drop_factor: float = 0.3
    batch_size: int = 32
    epochs: int = 30
    validation_fraction: float = 0.1
    early_stop_patience: int = 5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0


@dataclass(frozen=True)
class CfoDatabase:
    """Per-device reference CFO means plus the gating threshold."""

    references: dict  # device_id -> Hz
    threshold: float = DEFAULT_LAMBDA_HZ

    def __post_init__(self):
        if self.threshold <= 0:
            raise DatasetError(f"threshold must be > 0, got {self.threshold}")


@dataclass(frozen=True)
class HybridPrediction:
    label: int
    probs: np.ndarray
    out_of_database: bool = False


@dataclass
class TrainResult:
    model: Cnn
    cfo_database: CfoDatabase
    class_ids: list
    loss_curve: list = field(default_factory=list)
    val_accuracy_curve: list = field(default_factory=list)


def learning_rate_at(cfg: TrainConfig, epoch: int) -> float:
    """Step-decay schedule; ``epoch`` counts from 1."""
    return cfg.initial_lr * cfg.lr_drop_factor ** ((epoch - 1) // cfg.lr_drop_period)


class Adam:
    """Adam over every trainable parameter of a :class:`Cnn`."""

    def __init__(self, model: Cnn, cfg: TrainConfig):
        self.model = model
        self.cfg = cfg
        self.t = 0
        self.m = {key: np.zeros_like(p) for key, p in self._items()}
        self.v = {key: np.zeros_like(p) for key, p in self._items()}

    def _items(self):
        for li, name, p in self.model.parameters():
            yield (li, name), p

    def step(self, lr: float):
        self.t += 1
        b1, b2, eps = self.cfg.beta1, self.cfg.beta2, self.cfg.adam_eps
        for key, p in self._items():
            li, name = key
            g = self.model.layers[li].grads[name].astype(p.dtype)
            self.m[key] = b1 * self.m[key] + (1 - b1) * g
            self.v[key] = b2 * self.v[key] + (1 - b2) * g * g
            mhat = self.m[key] / (1 - b1**self.t)
            vhat = self.v[key] / (1 - b2**self.t)
            p -= lr * mhat / (np.sqrt(vhat) + eps)


def train(
    X: np.ndarray,
    labels: np.ndarray,
    cfos: np.ndarray,
    kind: str,
    cfg: TrainConfig,
    lambda_hz: float = DEFAULT_LAMBDA_HZ,
    kernel_width: int = 128,
    model: Cnn | None = None,
    verbose: bool = False,
) -> TrainResult:
    """Train a CNN on (representation, device label, estimated CFO) triples.

    ``X`` is (n, H, W); labels are raw device ids (mapped internally to
    contiguous class indices in ascending id order); ``cfos`` are the
    per-packet estimated total CFOs that feed the reference database.
    """
    X = np.asarray(X, dtype=np.float32)
    labels = np.asarray(labels)
    cfos = np.asarray(cfos, dtype=np.float64)
    if X.ndim != 3:
        raise DatasetError(f"X must be (n, H, W), got shape {X.shape}")
    if not (len(X) == len(labels) == len(cfos)):
        raise DatasetError("X, labels and cfos must have equal length")

    class_ids = sorted(int(c) for c in np.unique(labels))
    if len(class_ids) < 2:
        raise DatasetError(f"need at least 2 classes, got {len(class_ids)}")
    id_to_idx = {c: i for i, c in enumerate(class_ids)}
    y = np.array([id_to_idx[int(c)] for c in labels])
    counts = np.bincount(y, minlength=len(class_ids))
    if counts.min() == 0:
        raise DatasetError("every class needs at least one sample")

    references = {c: float(cfos[labels == c].mean()) for c in class_ids}
    db = CfoDatabase(references=references, threshold=lambda_hz)

    if model is None:
        input_shape = (1, X.shape[1], X.shape[2])
        model = build_model(
            kind if kind in ("spectrogram", "iq") else "iq",
            input_shape,
            len(class_ids),
            seed=cfg.seed,
            kernel_width=kernel_width,
        )
    model.class_ids = class_ids

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(X))
    n_val = int(round(cfg.validation_fraction * len(X)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if train_idx.size == 0:
        raise DatasetError("validation split leaves no training samples")

    Xb = X[:, None, :, :]  # add the channel axis
    opt = Adam(model, cfg)
    result = TrainResult(model=model, cfo_database=db, class_ids=class_ids)
    best_val, stagnant = -1.0, 0
    best_state = None

    for epoch in range(1, cfg.epochs + 1):
        lr = learning_rate_at(cfg, epoch)
        perm = rng.permutation(train_idx)
        epoch_loss = 0.0
        for start in range(0, perm.size, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            loss = model.loss_and_grads(Xb[batch], y[batch], training=True)
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            opt.step(lr)
            epoch_loss += loss * batch.size
        result.loss_curve.append(epoch_loss / perm.size)

        if val_idx.size:
            val_acc = _accuracy(model, Xb[val_idx], y[val_idx])
        else:
            val_acc = float("nan")
        result.val_accuracy_curve.append(val_acc)
        if verbose:
            print(
                f"epoch {epoch:3d}  lr {lr:.2e}  loss {result.loss_curve[-1]:.4f}"
                f"  val_acc {val_acc:.4f}"
            )
        if val_idx.size:
            if val_acc > best_val + 1e-12:
                best_val, stagnant = val_acc, 0
                best_state = _snapshot(model)
            else:
                stagnant += 1
                if stagnant >= cfg.early_stop_patience:
                    break

    if best_state is not None:
        _restore(model, best_state)
    return result


def _accuracy(model: Cnn, Xb: np.ndarray, y: np.ndarray, batch: int = 256) -> float:
    hits = 0
    for start in range(0, len(Xb), batch):
        z = model.logits(Xb[start : start + batch], training=False)
        hits += int(np.sum(np.argmax(z, axis=1) == y[start : start + batch]))
    return hits / len(Xb)


def _snapshot(model: Cnn):
    return [
        ({k: v.copy() for k, v in layer.params.items()},
         {k: v.copy() for k, v in layer.buffers.items()})
        for layer in model.layers
    ]


def _restore(model: Cnn, state):
    for layer, (params, buffers) in zip(model.layers, state):
        layer.params.update(params)
        layer.buffers.update(buffers)


def _prepare_input(model: Cnn, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim == 2:
        x = x[None, None]
    elif x.ndim == 3:
        x = x[:, None] if x.shape[0] != 1 else x[None]
    return x


def forward(model: Cnn, x: np.ndarray) -> np.ndarray:
    """Softmax probabilities for one input (inference mode)."""
    probs = softmax(model.logits(_prepare_input(model, x), training=False))
    return probs[0]


def predict_cnn(model: Cnn, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Argmax prediction; ties resolve to the lowest device id."""
    probs = forward(model, x)
    idx = int(np.argmax(probs))  # first max: lowest id given ascending class order
    return model.class_ids[idx], probs


def predict_hybrid(
    model: Cnn, x: np.ndarray, dut_cfo: float, db: CfoDatabase
) -> HybridPrediction:
    """CFO-gated prediction.

    Classes whose reference CFO differs from ``dut_cfo`` by more than the
    threshold are zeroed before the argmax. If the gate zeroes every class,
    the ungated argmax is returned flagged as out-of-database.
    """
    missing = [c for c in model.class_ids if c not in db.references]
    if missing:
        raise DatabaseIntegrityError(f"devices missing from the CFO database: {missing}")
    probs = forward(model, x)
    gated = probs.copy()
    for i, c in enumerate(model.class_ids):
        if abs(dut_cfo - db.references[c]) > db.threshold:
            gated[i] = 0.0
    if gated.max() == 0.0:
        idx = int(np.argmax(probs))
        return HybridPrediction(model.class_ids[idx], probs, out_of_database=True)
    idx = int(np.argmax(gated))
    return HybridPrediction(model.class_ids[idx], gated, out_of_database=False)
