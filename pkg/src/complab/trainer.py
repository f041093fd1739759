"""Mini-batch SGD with momentum, weight decay, schedule, and early stopping.

One loop serves every mode.  Given a transition matrix the loop minimizes
the corrected loss against complementary labels; given None it minimizes
plain softmax cross-entropy against whatever labels the dataset carries.
The velocity update is

    v <- momentum * v - lr * (grad + weight_decay * theta)
    theta <- theta + v

Validation accuracy is measured against the labels being trained on: for
corrected training the model's complementary prediction argmax(Q^T g) is
scored against ybar, for plain training argmax(g) against y.  The best
validation epoch's parameters are what the caller gets back.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .datakit import CompDataset, LabeledDataset
from .errors import DivergenceError, EmptyDataset, ShapeError, ValidationError
from .model import SoftmaxModel, batch_loss_and_grads, predict_batch, softmax
from .transition import TransitionMatrix


@dataclass
class TrainConfig:
    """Optimizer hyperparameters; the defaults are the small-scale standards."""

    lr: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 50
    lr_drops: tuple[tuple[int, float], ...] = ()  # (epoch, divisor): lr /= divisor after epoch
    early_stop_patience: int | None = None
    seed: int = 0
    val_fraction: float = 0.1
    max_iterations: int | None = None  # optional cap on total minibatch steps

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValidationError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ValidationError(f"momentum must lie in [0,1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValidationError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValidationError("batch_size and max_epochs must be positive")
        if not 0 < self.val_fraction < 1:
            raise ValidationError(f"val_fraction must lie in (0,1), got {self.val_fraction}")
        self.lr_drops = tuple((int(e), float(v)) for e, v in self.lr_drops)
        epochs = [e for e, _ in self.lr_drops]
        if epochs != sorted(set(epochs)):
            raise ValidationError("lr_drops epochs must be strictly increasing")
        if any(v <= 0 for _, v in self.lr_drops):
            raise ValidationError("lr_drops divisors must be positive")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValidationError("early_stop_patience must be at least 1 epoch")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValidationError("max_iterations must be positive")

    def lr_at(self, epoch: int) -> float:
        """Learning rate in force during a 1-based epoch."""
        lr = self.lr
        for drop_epoch, divisor in self.lr_drops:
            if epoch > drop_epoch:
                lr /= divisor
        return lr


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_acc: float


@dataclass
class TrainReport:
    config: TrainConfig
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    test_acc: float | None = None
    seconds: float = 0.0

    @property
    def best_val_acc(self) -> float:
        return self.epochs[self.best_epoch - 1].val_acc

    def to_json_dict(self) -> dict:
        blob = asdict(self)
        blob["config"]["lr_drops"] = [list(pair) for pair in self.config.lr_drops]
        return blob


def split_validation(dataset, val_fraction: float, seed: int):
    """Seeded shuffle, then split off a validation fraction (not stratified)."""
    if not 0 < val_fraction < 1:
        raise ValidationError(f"val_fraction must lie in (0,1), got {val_fraction}")
    n = dataset.n
    if n < 2:
        raise EmptyDataset("need at least 2 examples to split off validation")
    n_val = min(max(int(round(n * val_fraction)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.take(perm[n_val:]), dataset.take(perm[:n_val])


def evaluate(model: SoftmaxModel, dataset: LabeledDataset) -> float:
    """Fraction of examples whose predicted class equals the true label."""
    if dataset.n == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    return float((predict_batch(model, dataset.X) == dataset.y).mean())


def sgd_step(params: dict[str, np.ndarray], velocity: dict[str, np.ndarray],
             grads: dict[str, np.ndarray], lr: float, momentum: float,
             weight_decay: float) -> None:
    """One in-place momentum update over every parameter array."""
    for name, theta in params.items():
        v = velocity[name]
        v *= momentum
        v -= lr * (grads[name] + weight_decay * theta)
        theta += v


def _supervised_accuracy(model: SoftmaxModel, q: TransitionMatrix | None,
                         X: np.ndarray, labels: np.ndarray) -> float:
    """Accuracy of the trained predictive head against its own targets."""
    if q is None:
        pred = predict_batch(model, X)
    else:
        corrected = softmax(model.scores_batch(X)) @ q.entries
        pred = np.argmax(corrected, axis=1) + 1
    return float((pred == labels).mean())


def _training_labels(data, q: TransitionMatrix | None) -> np.ndarray:
    if isinstance(data, CompDataset):
        return data.ybar
    if isinstance(data, LabeledDataset):
        if q is not None:
            raise ValidationError(
                "corrected training expects complementary labels, got true labels"
            )
        return data.y
    raise ShapeError(f"unsupported dataset type {type(data).__name__}")


def train(model: SoftmaxModel, q: TransitionMatrix | None, data,
          config: TrainConfig, test_set: LabeledDataset | None = None
          ) -> tuple[SoftmaxModel, TrainReport]:
    """Run the training loop; returns the best-validation model and a report.

    The model is trained in place from its current parameters and the
    returned copy holds the parameters of the best validation epoch, never
    a later one.  Deterministic given (config.seed, data order).
    """
    started = time.perf_counter()
    labels = _training_labels(data, q)
    if data.n == 0:
        raise EmptyDataset("empty training set")
    if q is not None and q.c != model.c:
        raise ShapeError(f"matrix is {q.c}-class, model has c={model.c}")
    if int(labels.max()) > model.c:
        raise ShapeError(f"labels reach {labels.max()} but model has c={model.c}")

    train_split, val_split = split_validation(data, config.val_fraction, config.seed)
    train_labels = _training_labels(train_split, q)
    val_labels = _training_labels(val_split, q)

    report = TrainReport(config=config)
    rng = np.random.default_rng(config.seed)
    velocity = {name: np.zeros_like(p) for name, p in model.params.items()}
    best_params = {name: p.copy() for name, p in model.params.items()}
    steps = 0
    out_of_steps = False

    for epoch in range(1, config.max_epochs + 1):
        lr = config.lr_at(epoch)
        order = rng.permutation(train_split.n)
        loss_sum = 0.0
        seen = 0
        for start in range(0, train_split.n, config.batch_size):
            batch = order[start:start + config.batch_size]
            out = batch_loss_and_grads(model, q, train_split.X[batch],
                                       train_labels[batch])
            if not np.isfinite(out.loss):
                err = DivergenceError(f"non-finite training loss at epoch {epoch}")
                err.report = report  # partial trajectory for the caller's logs
                raise err
            sgd_step(model.params, velocity, out.param_grads, lr,
                     config.momentum, config.weight_decay)
            loss_sum += out.loss * batch.size
            seen += batch.size
            steps += 1
            if config.max_iterations is not None and steps >= config.max_iterations:
                out_of_steps = True
                break
        model.assert_finite()
        val_acc = _supervised_accuracy(model, q, val_split.X, val_labels)
        report.epochs.append(EpochStats(epoch, loss_sum / seen, val_acc))
        if report.best_epoch == 0 or val_acc > report.best_val_acc:
            report.best_epoch = epoch
            best_params = {name: p.copy() for name, p in model.params.items()}
        if out_of_steps:
            break
        if (config.early_stop_patience is not None
                and epoch - report.best_epoch >= config.early_stop_patience):
            break

    best_model = SoftmaxModel(model.arch, model.d, model.c, model.hidden, best_params)
    if test_set is not None:
        report.test_acc = evaluate(best_model, test_set)
    report.seconds = time.perf_counter() - started
    return best_model, report