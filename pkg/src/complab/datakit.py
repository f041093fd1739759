"""Datasets: ingestion, standardization, synthetic blobs, label corruption.

Two containers flow through the package.  LabeledDataset carries true labels
y in 1..c.  CompDataset carries complementary labels ybar in 1..c, plus
optional provenance (the generating matrix and the hidden true labels) used
only for diagnostics and final evaluation, never for training.
"""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    BadMagic,
    EmptyDataset,
    InconsistentWidth,
    ParseError,
    ShapeError,
    TruncatedFile,
    ValidationError,
)
from .transition import TransitionMatrix, sample_complementary


def _check_labels(labels: np.ndarray, c: int, what: str) -> None:
    if labels.size == 0:
        raise EmptyDataset(f"no {what} rows")
    if np.any(labels < 1) or np.any(labels > c):
        raise ValidationError(f"{what} labels must lie in 1..{c}")


@dataclass
class LabeledDataset:
    """Feature matrix with true labels in 1..c."""

    X: np.ndarray
    y: np.ndarray
    c: int

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ShapeError(f"features {self.X.shape} do not match {self.y.shape[0]} labels")
        _check_labels(self.y, self.c, "dataset")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.X[indices], self.y[indices], self.c)


@dataclass
class CompDataset:
    """Feature matrix with complementary labels in 1..c.

    q and y_true are provenance from synthetic corruption; training code
    receives only X and ybar, y_true exists for diagnostics and tests.
    """

    X: np.ndarray
    ybar: np.ndarray
    c: int
    q: TransitionMatrix | None = None
    y_true: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.ybar = np.asarray(self.ybar, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.ybar.shape[0]:
            raise ShapeError(f"features {self.X.shape} do not match {self.ybar.shape[0]} labels")
        _check_labels(self.ybar, self.c, "complementary")
        if self.y_true is not None:
            self.y_true = np.asarray(self.y_true, dtype=np.int64)
            if self.y_true.shape != self.ybar.shape:
                raise ShapeError("true-label provenance has wrong length")
            if np.any(self.y_true == self.ybar):
                raise ValidationError("a complementary label equals its true label")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, indices: np.ndarray) -> "CompDataset":
        kept = None if self.y_true is None else self.y_true[indices]
        return CompDataset(self.X[indices], self.ybar[indices], self.c, self.q, kept)

    def without_provenance(self) -> "CompDataset":
        return CompDataset(self.X, self.ybar, self.c)


def _read_rows(path) -> list[tuple[int, list[str]]]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        return [(lineno, row) for lineno, row in enumerate(csv.reader(fh), start=1) if row]


def _split_header(rows, has_header):
    """Detect an optional header row: any cell that does not parse as a number."""
    if not rows:
        raise ParseError("empty file")
    if has_header is None:
        try:
            [float(tok) for tok in rows[0][1]]
            has_header = False
        except ValueError:
            has_header = True
    header = rows[0][1] if has_header else None
    return header, rows[1:] if has_header else rows


def _resolve_column(label_col, header, width, path):
    if isinstance(label_col, str):
        if header is None or label_col not in header:
            raise ParseError(f"{path}: no column named {label_col!r}")
        return header.index(label_col)
    idx = label_col if label_col >= 0 else width + label_col
    if not 0 <= idx < width:
        raise ParseError(f"{path}: label column {label_col} outside width {width}")
    return idx


def _parse_table(path, label_col, has_header):
    """Shared CSV walk: feature matrix plus raw label tokens with line numbers."""
    header, rows = _split_header(_read_rows(path), has_header)
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    width = len(rows[0][1])
    col = _resolve_column(label_col, header, width, path)
    feats, raw_labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise InconsistentWidth(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        try:
            feats.append([float(tok) for j, tok in enumerate(row) if j != col])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric feature value") from None
        if not row[col].strip():
            raise ParseError(f"{path}:{lineno}: missing label")
        raw_labels.append(row[col].strip())
    return np.array(feats), raw_labels


def load_csv(path, label_col: int | str = -1, has_header: bool | None = None) -> LabeledDataset:
    """Read a true-label CSV; distinct label values map to 1..c in sorted order."""
    X, raw_labels = _parse_table(path, label_col, has_header)
    try:
        keys = sorted(set(raw_labels), key=float)
    except ValueError:
        keys = sorted(set(raw_labels))
    mapping = {lab: i + 1 for i, lab in enumerate(keys)}
    y = np.array([mapping[lab] for lab in raw_labels])
    return LabeledDataset(X, y, c=len(keys))


def load_comp_csv(path, c: int | None = None, label_col: int | str = -1,
                  has_header: bool | None = None) -> CompDataset:
    """Read a complementary-label CSV.

    Unlike load_csv, label values are taken verbatim as class ids so they
    stay aligned with the rows of the transition matrix that produced them.
    """
    X, raw_labels = _parse_table(path, label_col, has_header)
    try:
        ybar = np.array([int(float(lab)) for lab in raw_labels])
    except ValueError:
        raise ParseError(f"{path}: complementary labels must be integers") from None
    return CompDataset(X, ybar, c=c if c is not None else int(ybar.max()))


def save_csv(dataset: LabeledDataset | CompDataset, path) -> None:
    """Write features plus the label column, lossless at 17 significant digits."""
    is_comp = isinstance(dataset, CompDataset)
    labels = dataset.ybar if is_comp else dataset.y
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(dataset.d)] + ["ybar" if is_comp else "label"])
        for x, lab in zip(dataset.X, labels):
            writer.writerow([format(v, ".17g") for v in x] + [str(int(lab))])


def standardize(train, *others):
    """Per-feature z-score using training statistics only.

    Returns (transformed datasets in input order, (mean, std)).  Standard
    deviations are floored at 1e-8 so constant features map to zero.
    """
    if train.n == 0:
        raise EmptyDataset("cannot standardize an empty training set")
    mean = train.X.mean(axis=0)
    std = np.maximum(train.X.std(axis=0), 1e-8)
    out = tuple(replace(ds, X=(ds.X - mean) / std) for ds in (train, *others))
    return out, (mean, std)


def default_means(c: int, d: int) -> np.ndarray:
    """Unit-norm class means: spread on the circle for d=2, basis vectors for d>=c."""
    if d == 2:
        angles = 2.0 * np.pi * np.arange(c) / c
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if d >= c:
        return np.eye(c, d)
    raise ShapeError(f"no default means for d={d}, c={c}; pass means explicitly")


def make_blobs(c: int, d: int, n_per_class: int, means: np.ndarray | None = None,
               sigma: float = 1.0, seed: int = 0) -> LabeledDataset:
    """Isotropic Gaussian blob per class, shuffled, deterministic in seed."""
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if means is None:
        means = default_means(c, d)
    means = np.asarray(means, dtype=np.float64)
    if means.shape != (c, d):
        raise ShapeError(f"means shape {means.shape}, expected ({c}, {d})")
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(means[i], sigma, size=(n_per_class, d))
                        for i in range(c)])
    y = np.repeat(np.arange(1, c + 1), n_per_class)
    order = rng.permutation(c * n_per_class)
    return LabeledDataset(X[order], y[order], c)


def class_posterior(means: np.ndarray, sigma: float, X: np.ndarray) -> np.ndarray:
    """Exact P(Y|x) rows for the equal-prior blob generator (test oracle)."""
    sq = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    logits = -sq / (2.0 * sigma * sigma)
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def corrupt(dataset: LabeledDataset, q: TransitionMatrix, seed: int = 0) -> CompDataset:
    """Draw one complementary label per example from its class's Q row."""
    if q.c != dataset.c:
        raise ShapeError(f"matrix is {q.c}-class, dataset has c={dataset.c}")
    rng = np.random.default_rng(seed)
    ybar = np.zeros(dataset.n, dtype=np.int64)
    for label in range(1, dataset.c + 1):
        idx = np.nonzero(dataset.y == label)[0]
        if idx.size:
            ybar[idx] = sample_complementary(q, label, rng, size=idx.size)
    return CompDataset(dataset.X, ybar, dataset.c, q=q, y_true=dataset.y)


IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _open_maybe_gzip(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, count, path):
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedFile(f"{path}: wanted {count} bytes, got {len(data)}")
    return data


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Load an IDX image/label pair: pixels scaled to [0,1], labels to 1..c."""
    with _open_maybe_gzip(images_path) as fh:
        magic, n, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagic(f"{images_path}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")
        pixels = np.frombuffer(_read_exact(fh, n * rows * cols, images_path), dtype=np.uint8)
    with _open_maybe_gzip(labels_path) as fh:
        magic, n_labels = struct.unpack(">II", _read_exact(fh, 8, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise BadMagic(f"{labels_path}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")
        labels = np.frombuffer(_read_exact(fh, n_labels, labels_path), dtype=np.uint8)
    if n != n_labels:
        raise ValidationError(f"{images_path}: {n} images but {n_labels} labels")
    X = pixels.reshape(n, rows * cols).astype(np.float64) / 255.0
    y = labels.astype(np.int64) + 1
    return LabeledDataset(X, y, c=int(y.max()))
