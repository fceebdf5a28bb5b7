"""Dataset splitting, the training loop, metrics and curve emission.

Splits are stratified by label and disjoint by subject: per-subject
leakage across train/test would invalidate any dimension comparison.
The positive class is PD throughout (sensitivity = PD recall).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from drawnet.augment import AugmentPlan, EncodedExample, expand_dataset
from drawnet.encode import EncodeConfig, encode_for_dim
from drawnet.errors import (
    ClassMissing,
    EmptyMatrix,
    EmptyPartition,
    NonFiniteLogit,
    NumericDivergence,
    ShapeMismatch,
)
from drawnet.ingest import LABELS, DrawingRecord, FeatureSet, label_index
from drawnet.net import Network, NetworkConfig, build_network
from drawnet.preprocess import prepare_trace
from drawnet.tensor import ops
from drawnet.tensor.backend import deterministic_blas


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    batch_size: int = 8
    seed: int = 0
    val_fraction: float = 0.2  # carved from the training split, by subject
    stop_at_train_acc: float | None = None  # early exit for capacity checks
    stop_at_train_loss: float | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray) -> "ConfusionMatrix":
        y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
        return cls(
            tp=int(np.sum((y_true == 1) & (y_pred == 1))),
            fn=int(np.sum((y_true == 1) & (y_pred == 0))),
            fp=int(np.sum((y_true == 0) & (y_pred == 1))),
            tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        )


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    sensitivity: float
    specificity: float
    f1: float
    undefined: frozenset[str] = frozenset()  # 0/0 ratios reported as 0


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    """Confusion-matrix scores; undefined ratios come back as 0, flagged."""
    if cm.total == 0:
        raise EmptyMatrix("empty confusion matrix")
    undefined = set()

    def ratio(num: int, den: int, name: str) -> float:
        if den == 0:
            undefined.add(name)
            return 0.0
        return num / den

    precision = ratio(cm.tp, cm.tp + cm.fp, "precision")
    sensitivity = ratio(cm.tp, cm.tp + cm.fn, "sensitivity")
    specificity = ratio(cm.tn, cm.tn + cm.fp, "specificity")
    if precision + sensitivity == 0:
        undefined.add("f1")
        f1 = 0.0
    else:
        f1 = 2 * precision * sensitivity / (precision + sensitivity)
    return Metrics(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=precision,
        sensitivity=sensitivity,
        specificity=specificity,
        f1=f1,
        undefined=frozenset(undefined),
    )


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float | None] = field(default_factory=list)
    val_acc: list[float | None] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
        for i in range(len(self)):
            writer.writerow(
                [
                    i + 1,
                    repr(self.train_loss[i]),
                    repr(self.train_acc[i]),
                    "" if self.val_loss[i] is None else repr(self.val_loss[i]),
                    "" if self.val_acc[i] is None else repr(self.val_acc[i]),
                ]
            )
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


def split_dataset(
    records: Sequence[DrawingRecord],
    test_fraction: float = 0.2,
    seed: int = 0,
) -> tuple[list[DrawingRecord], list[DrawingRecord]]:
    """Stratified-by-label, disjoint-by-subject split.

    Subjects of each class are shuffled from the seed and moved into the
    test partition until it holds round(test_fraction * class size)
    records.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    present = {r.label for r in records}
    for label in LABELS:
        if label not in present:
            raise ClassMissing(label)
    rng = np.random.default_rng(seed)
    test_subjects: set[tuple[str, str]] = set()
    for label in LABELS:
        class_records = [r for r in records if r.label == label]
        subjects = sorted({r.subject_id for r in class_records})
        rng.shuffle(subjects)
        target = round(test_fraction * len(class_records))
        count = 0
        for subject in subjects:
            if count >= target:
                break
            count += sum(1 for r in class_records if r.subject_id == subject)
            test_subjects.add((label, subject))
    train = [r for r in records if (r.label, r.subject_id) not in test_subjects]
    test = [r for r in records if (r.label, r.subject_id) in test_subjects]
    return train, test


def _epoch_eval(net: Network, x: np.ndarray, y: np.ndarray, batch: int) -> tuple[float, float]:
    total_loss = 0.0
    correct = 0
    for start in range(0, len(x), batch):
        xb, yb = x[start : start + batch], y[start : start + batch]
        logits = net.forward(xb, "eval")
        loss, _ = ops.softmax_cross_entropy(logits, yb)
        total_loss += loss * len(xb)
        correct += int(np.sum(np.argmax(logits, axis=-1) == yb))
    return total_loss / len(x), correct / len(x)


def train(
    net: Network,
    x_train: np.ndarray,
    y_train: np.ndarray,
    cfg: TrainConfig,
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
) -> History:
    """Mini-batch Adam with dropout; deterministic given cfg.seed.

    Train loss/accuracy are accumulated from the training batches
    themselves (dropout active), the Fig-5 style curve. A non-finite
    loss aborts instead of emitting corrupt curves.
    """
    if len(x_train) == 0:
        raise EmptyPartition("no training examples")
    if x_train.shape[1:] != net.cfg.input_shape:
        raise ShapeMismatch(
            f"batch samples {x_train.shape[1:]} != network input {net.cfg.input_shape}"
        )
    ss = np.random.SeedSequence(cfg.seed)
    shuffle_rng, dropout_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    optim = ops.Adam(net.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    history = History()
    n = len(x_train)
    try:
        with deterministic_blas():
            _train_loop(net, x_train, y_train, cfg, x_val, y_val,
                        shuffle_rng, dropout_rng, optim, history, n)
    except NonFiniteLogit as exc:
        # non-finite values reached an evaluation pass before the batch
        # loop's own check could fire
        raise NumericDivergence(f"diverged after epoch {len(history)}") from exc
    return history


def _train_loop(net, x_train, y_train, cfg, x_val, y_val,
                shuffle_rng, dropout_rng, optim, history, n):
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            net.zero_grad()
            logits = net.forward(xb, "train", dropout_rng)
            try:
                loss, grad = ops.softmax_cross_entropy(logits, yb)
            except NonFiniteLogit as exc:
                raise NumericDivergence(f"logits diverged at epoch {epoch + 1}") from exc
            if not np.isfinite(loss):
                raise NumericDivergence(f"loss diverged at epoch {epoch + 1}")
            net.backward(grad)
            optim.step()
            epoch_loss += loss * len(idx)
            correct += int(np.sum(np.argmax(logits, axis=-1) == yb))
        history.train_loss.append(epoch_loss / n)
        history.train_acc.append(correct / n)
        if x_val is not None and len(x_val):
            val_loss, val_acc = _epoch_eval(net, x_val, y_val, cfg.batch_size)
            history.val_loss.append(val_loss)
            history.val_acc.append(val_acc)
        else:
            history.val_loss.append(None)
            history.val_acc.append(None)
        if cfg.stop_at_train_acc is not None or cfg.stop_at_train_loss is not None:
            loss_eval, acc_eval = _epoch_eval(net, x_train, y_train, cfg.batch_size)
            acc_ok = cfg.stop_at_train_acc is None or acc_eval >= cfg.stop_at_train_acc
            loss_ok = cfg.stop_at_train_loss is None or loss_eval < cfg.stop_at_train_loss
            if acc_ok and loss_ok:
                break


def evaluate(
    net: Network, x_test: np.ndarray, y_test: np.ndarray, batch_size: int = 8
) -> tuple[ConfusionMatrix, Metrics, np.ndarray]:
    """Eval-mode predictions over a held-out set; PD is the positive class."""
    if len(x_test) == 0:
        raise EmptyPartition("no test examples")
    preds = np.empty(len(x_test), dtype=np.int64)
    with deterministic_blas():
        for start in range(0, len(x_test), batch_size):
            logits = net.forward(x_test[start : start + batch_size], "eval")
            preds[start : start + len(logits)] = np.argmax(logits, axis=-1)
    cm = ConfusionMatrix.from_predictions(y_test, preds)
    return cm, compute_metrics(cm), preds


def stack_examples(examples: Sequence[EncodedExample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([e.values for e in examples]).astype(np.float32)
    y = np.array([label_index(e.label) for e in examples], dtype=np.int64)
    return x, y


def encode_records(
    records: Sequence[DrawingRecord], dim: int, fs: FeatureSet, cfg: EncodeConfig
) -> tuple[np.ndarray, np.ndarray]:
    resample_to = cfg.length if dim == 1 else None
    arrays = []
    for record in records:
        trace = prepare_trace(record, with_velocity=fs.velocity, resample_to=resample_to)
        arrays.append(encode_for_dim(trace, dim, fs, cfg))
    x = np.stack(arrays).astype(np.float32)
    y = np.array([label_index(r.label) for r in records], dtype=np.int64)
    return x, y


@dataclass
class PipelineResult:
    network: Network
    history: History
    confusion: ConfusionMatrix
    metrics: Metrics
    test_records: list[DrawingRecord]
    n_train_examples: int


def run_pipeline(
    records: Sequence[DrawingRecord],
    *,
    dim: int,
    fs: FeatureSet,
    encode_cfg: EncodeConfig,
    train_cfg: TrainConfig,
    plan: AugmentPlan | None = None,
    test_fraction: float = 0.2,
) -> PipelineResult:
    """Split -> augment (train only) -> encode -> train -> evaluate."""
    trainval, test = split_dataset(records, test_fraction, train_cfg.seed)
    if not test:
        raise EmptyPartition("test partition is empty")
    if train_cfg.val_fraction > 0:
        try:
            train_recs, val_recs = split_dataset(
                trainval, train_cfg.val_fraction, train_cfg.seed + 1
            )
        except ClassMissing:
            train_recs, val_recs = list(trainval), []
    else:
        train_recs, val_recs = list(trainval), []
    if not train_recs:
        raise EmptyPartition("train partition is empty")

    if plan is None:
        train_x, train_y = encode_records(train_recs, dim, fs, encode_cfg)
        n_train = len(train_recs)
    else:
        examples = expand_dataset(train_recs, plan, dim, fs, encode_cfg)
        train_x, train_y = stack_examples(examples)
        n_train = len(examples)
    val_x = val_y = None
    if val_recs:
        val_x, val_y = encode_records(val_recs, dim, fs, encode_cfg)

    extent = {1: encode_cfg.length, 2: encode_cfg.width, 3: encode_cfg.resolution}[dim]
    in_channels = len(fs.enabled()) if dim == 1 else 3
    net = build_network(NetworkConfig(dim, in_channels, extent), seed=train_cfg.seed)
    history = train(net, train_x, train_y, train_cfg, val_x, val_y)

    test_x, test_y = encode_records(test, dim, fs, encode_cfg)
    cm, metrics, _ = evaluate(net, test_x, test_y, train_cfg.batch_size)
    return PipelineResult(
        network=net,
        history=history,
        confusion=cm,
        metrics=metrics,
        test_records=list(test),
        n_train_examples=n_train,
    )


def metrics_csv_row(dim: int, fs: FeatureSet, metrics: Metrics) -> list[str]:
    return [
        str(dim),
        fs.letters(),
        f"{metrics.precision:.6f}",
        f"{metrics.sensitivity:.6f}",
        f"{metrics.specificity:.6f}",
        f"{metrics.accuracy:.6f}",
        f"{metrics.f1:.6f}",
    ]


METRICS_CSV_HEADER = ["dim", "features", "precision", "sensitivity", "specificity", "accuracy", "f1"]


def write_metrics_csv(path: str | Path, rows: Sequence[Sequence[str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_CSV_HEADER)
    for row in rows:
        writer.writerow(row)
    Path(path).write_text(buf.getvalue())
