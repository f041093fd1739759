"""Transition-matrix estimation from complementary labels plus anchors.

The recipe has two halves.  First train an ordinary softmax classifier on
(X, ybar) pairs; its output approximates the complementary posterior.
Second, average that output over a handful of anchor instances whose true
class is known: for anchors of class y the average estimates row y of the
transition matrix.  The raw averages then get projected onto the valid
matrix set (zero diagonal, nonnegative, rows summing to one).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datakit import CompDataset, LabeledDataset, _parse_table
from .errors import EmptyAnchorClass, ParseError, ShapeError, ValidationError
from .model import SoftmaxModel, softmax
from .trainer import TrainConfig, train
from .transition import TransitionMatrix

DEFAULT_ANCHORS_PER_CLASS = 10

_ANCHOR_FILE = re.compile(r"anchors_(\d+)\.csv$")


@dataclass
class AnchorSet:
    """A few labeled instances per class; index i of the list is class i+1."""

    features: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.features) < 3:
            raise ValidationError(f"need at least 3 classes, got {len(self.features)}")
        self.features = [np.asarray(f, dtype=np.float64) for f in self.features]
        for i, f in enumerate(self.features):
            if f.ndim != 2 or f.shape[0] == 0:
                raise EmptyAnchorClass(f"class {i + 1} has no anchors")
            if f.shape[1] != self.features[0].shape[1]:
                raise ShapeError(f"anchor width mismatch at class {i + 1}")
            if not np.all(np.isfinite(f)):
                raise ValidationError(f"non-finite anchor feature in class {i + 1}")

    @property
    def c(self) -> int:
        return len(self.features)

    @property
    def d(self) -> int:
        return self.features[0].shape[1]

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.features)

    @classmethod
    def from_labeled(cls, dataset: LabeledDataset,
                     per_class: int = DEFAULT_ANCHORS_PER_CLASS,
                     seed: int = 0) -> "AnchorSet":
        """Sample up to per_class anchors per class without replacement.

        A class with fewer examples than requested contributes all of them;
        the shortfall shows up in .counts.
        """
        if per_class < 1:
            raise ValidationError(f"per_class must be positive, got {per_class}")
        rng = np.random.default_rng(seed)
        features = []
        for k in range(1, dataset.c + 1):
            idx = np.flatnonzero(dataset.y == k)
            if idx.size == 0:
                raise EmptyAnchorClass(f"class {k} absent from the anchor pool")
            chosen = rng.choice(idx, size=min(per_class, idx.size), replace=False)
            features.append(dataset.X[np.sort(chosen)])
        return cls(features)

    @classmethod
    def from_csv(cls, path, c: int | None = None, label_col: int | str = -1,
                 has_header: bool | None = None) -> "AnchorSet":
        """Single CSV holding every anchor, final column the true class id.

        Class ids are taken verbatim (1..c), never remapped, so they stay
        aligned with the matrix rows they will estimate.
        """
        X, labels = _parse_anchor_table(path, label_col, has_header)
        top = c if c is not None else int(labels.max())
        if labels.min() < 1 or labels.max() > top:
            raise ValidationError(f"{path}: anchor labels must lie in 1..{top}")
        features = []
        for k in range(1, top + 1):
            rows = X[labels == k]
            if rows.shape[0] == 0:
                raise EmptyAnchorClass(f"{path}: no anchors for class {k}")
            features.append(rows)
        return cls(features)

    @classmethod
    def from_dir(cls, directory, label_col: int | str = -1,
                 has_header: bool | None = None) -> "AnchorSet":
        """One anchors_<k>.csv per class inside a directory.

        Each file uses the same layout as from_csv and may only contain its
        own class id; the set of files must cover 1..c with no gaps.
        """
        directory = Path(directory)
        found = {}
        for entry in directory.iterdir():
            m = _ANCHOR_FILE.fullmatch(entry.name)
            if m:
                found[int(m.group(1))] = entry
        if not found:
            raise ParseError(f"{directory}: no anchors_<k>.csv files")
        top = max(found)
        missing = sorted(set(range(1, top + 1)) - set(found))
        if missing:
            raise EmptyAnchorClass(f"{directory}: missing anchor files for classes {missing}")
        features = []
        for k in range(1, top + 1):
            X, labels = _parse_anchor_table(found[k], label_col, has_header)
            if np.any(labels != k):
                raise ValidationError(f"{found[k]}: expected only class {k} labels")
            features.append(X)
        return cls(features)


def _parse_anchor_table(path, label_col, has_header):
    X, raw_labels = _parse_table(path, label_col, has_header)
    try:
        labels = np.array([int(float(v)) for v in raw_labels], dtype=np.int64)
    except ValueError:
        raise ParseError(f"{path}: anchor labels must be integers") from None
    return X, labels


@dataclass
class QEstimate:
    """Raw per-class averages and their projection onto valid matrices."""

    raw: np.ndarray
    projected: TransitionMatrix
    anchor_counts: tuple[int, ...]
    diagnostics: dict


def fit_comp_predictor(comp: CompDataset, arch: str = "one_hidden",
                       config: TrainConfig | None = None,
                       hidden: int = 32) -> SoftmaxModel:
    """Train a plain softmax classifier to predict the complementary label.

    No loss correction is applied: the point is a model of the corrupted
    label distribution itself, which the anchor averages then read out.
    The hidden layer matters here; a linear scorer saturates toward a
    vertex at easy points and cannot represent the interior distributions
    the estimate needs.
    """
    config = config or TrainConfig()
    if arch == "linear":
        model = SoftmaxModel.linear(comp.d, comp.c, seed=config.seed)
    elif arch == "one_hidden":
        model = SoftmaxModel.one_hidden(comp.d, comp.c, hidden=hidden, seed=config.seed)
    else:
        raise ValidationError(f"unknown arch {arch!r}")
    best, _ = train(model, None, comp.without_provenance(), config)
    return best


def project_rows(raw: np.ndarray) -> tuple[TransitionMatrix, dict]:
    """Project raw row estimates onto the valid matrix set.

    Order matters: zero the diagonal (structural), clamp negatives, then
    renormalize each row.  A row left with no mass falls back to the
    uniform off-diagonal row and is reported in the diagnostics.
    """
    m = np.array(raw, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got {m.shape}")
    c = m.shape[0]
    diag_removed = float(np.max(np.diag(m)))
    np.fill_diagonal(m, 0.0)
    m = np.clip(m, 0.0, None)
    sums = m.sum(axis=1)
    fallback_rows = [int(i) + 1 for i in np.flatnonzero(sums == 0.0)]
    for i in range(c):
        if sums[i] == 0.0:
            m[i] = 1.0 / (c - 1)
            m[i, i] = 0.0
        else:
            m[i] /= sums[i]
    diagnostics = {
        "max_diagonal_removed": diag_removed,
        "uniform_fallback_rows": fallback_rows,
    }
    return TransitionMatrix(m), diagnostics


def estimate_q(predictor, anchors: AnchorSet) -> QEstimate:
    """Average predicted label distributions over each class's anchors.

    predictor only needs a scores_batch(X) method returning one score row
    per anchor; anything satisfying that works, trained or synthetic.
    """
    raw = np.vstack([
        softmax(predictor.scores_batch(f)).mean(axis=0) for f in anchors.features
    ])
    projected, diagnostics = project_rows(raw)
    return QEstimate(raw, projected, anchors.counts, diagnostics)


def q_error(q_hat, q_true) -> dict:
    """Entrywise error report between an estimate and a reference matrix."""
    a = q_hat.entries if isinstance(q_hat, TransitionMatrix) else np.asarray(q_hat, dtype=np.float64)
    b = q_true.entries if isinstance(q_true, TransitionMatrix) else np.asarray(q_true, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    return {
        "max_abs": float(diff.max()),
        "mean_abs": float(diff.mean()),
        "per_row_l1": [float(v) for v in diff.sum(axis=1)],
    }
