"""Class-transition matrices for complementary labels.

A transition matrix Q is a c x c row-stochastic matrix with zero diagonal:
entries[i][j] is the probability that an example whose true class is i+1 is
annotated with the complementary label j+1.  Class labels are 1-based
everywhere in the public API; matrix entries use ordinary 0-based indexing.

Three generators cover the bias regimes used by the experiment harness:

  uniform    every off-diagonal entry equals 1/(c-1)
  without0   all off-diagonal entries positive but tiered 0.6/0.3/0.1
  with0      exactly k nonzero entries per row, random masses
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import (
    InvalidClassCount,
    ParseError,
    RetriesExhausted,
    ShapeError,
    ValidationError,
)

ROW_SUM_TOL = 1e-9
SINGULAR_DET_TOL = 1e-10

# Regime names accepted by BiasRegime and the CLI.
REGIME_KINDS = ("uniform", "without0", "with0", "manual")


@dataclass
class TransitionMatrix:
    """Row-stochastic c x c matrix with zero diagonal."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        self.entries = np.asarray(self.entries, dtype=np.float64)
        validate_entries(self.entries)

    @property
    def c(self) -> int:
        return self.entries.shape[0]

    def row(self, y: int) -> np.ndarray:
        """Flip distribution for true class y (1-based)."""
        if not 1 <= y <= self.c:
            raise ValidationError(f"label {y} outside 1..{self.c}")
        return self.entries[y - 1]


def validate_entries(entries: np.ndarray) -> None:
    """Raise unless entries form a valid transition matrix."""
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise ShapeError(f"expected square matrix, got shape {entries.shape}")
    c = entries.shape[0]
    if c <= 2:
        raise InvalidClassCount(f"need more than 2 classes, got c={c}")
    if not np.all(np.isfinite(entries)):
        raise ValidationError("non-finite entries")
    if np.any(np.diag(entries) != 0.0):
        raise ValidationError("diagonal must be exactly zero")
    if np.any(entries < 0.0) or np.any(entries > 1.0):
        raise ValidationError("entries must lie in [0, 1]")
    row_sums = entries.sum(axis=1)
    bad = np.nonzero(np.abs(row_sums - 1.0) > ROW_SUM_TOL)[0]
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"row {i + 1} sums to {row_sums[i]:.12g}, expected 1")


@dataclass
class BiasRegime:
    """How complementary labels were (or should be) generated.

    kind is one of REGIME_KINDS.  with0 needs k, the number of labels
    eligible as complements of each class; manual carries the matrix.
    """

    kind: str
    seed: int | None = None
    k: int | None = None
    matrix: TransitionMatrix | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in REGIME_KINDS:
            raise ValidationError(f"unknown regime kind {self.kind!r}")
        if self.kind == "manual" and self.matrix is None:
            raise ValidationError("manual regime needs a matrix")

    def build(self, c: int) -> TransitionMatrix:
        if self.kind == "uniform":
            return make_uniform(c)
        if self.kind == "without0":
            return make_without_zero(c, self.seed or 0)
        if self.kind == "with0":
            if self.k is None or not 1 <= self.k <= c - 1:
                raise ValidationError(f"with0 needs 1 <= k <= {c - 1}, got {self.k}")
            return make_with_zero(c, self.k, self.seed or 0)
        if self.matrix.c != c:
            raise ShapeError(f"manual matrix is {self.matrix.c}-class, data has c={c}")
        return self.matrix


def make_uniform(c: int) -> TransitionMatrix:
    """All c-1 wrong classes equally likely as the complementary label."""
    if c <= 2:
        raise InvalidClassCount(f"need more than 2 classes, got c={c}")
    entries = np.full((c, c), 1.0 / (c - 1))
    np.fill_diagonal(entries, 0.0)
    return TransitionMatrix(entries)


def make_without_zero(c: int, seed: int) -> TransitionMatrix:
    """Tiered bias with full support on every off-diagonal slot.

    Per row, the c-1 off-diagonal positions are split uniformly at random
    into three groups of near-equal size (earlier groups take the remainder)
    holding total mass 0.6, 0.3 and 0.1; mass is spread evenly inside each
    group, so every off-diagonal entry stays positive.  With c=3 only two
    slots exist, the third group is empty, and the surviving masses are
    renormalized (to 2/3 and 1/3), keeping the 6:3:1 proportions among the
    groups that do exist.
    """
    if c <= 2:
        raise InvalidClassCount(f"need more than 2 classes, got c={c}")
    rng = np.random.default_rng(seed)
    m = c - 1
    base, rem = divmod(m, 3)
    sizes = [base + (1 if g < rem else 0) for g in range(3)]
    masses = np.array([0.6, 0.3, 0.1])
    masses = masses / masses[np.array(sizes) > 0].sum()
    entries = np.zeros((c, c))
    for i in range(c):
        slots = np.concatenate([np.arange(i), np.arange(i + 1, c)])
        order = rng.permutation(m)
        start = 0
        for size, mass in zip(sizes, masses):
            if size == 0:
                continue
            group = slots[order[start:start + size]]
            entries[i, group] = mass / size
            start += size
    return TransitionMatrix(entries)


def make_with_zero(c: int, k: int, seed: int, max_tries: int = 1000) -> TransitionMatrix:
    """Sparse bias: k random wrong classes per row, random masses.

    Row masses are independent uniform(0,1) draws over the k selected slots,
    normalized to sum 1.  The whole matrix is redrawn until every column has
    support somewhere, so every class occurs as a complementary label.
    """
    if c <= 2:
        raise InvalidClassCount(f"need more than 2 classes, got c={c}")
    if not 1 <= k <= c - 1:
        raise ValidationError(f"need 1 <= k <= c-1, got k={k}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        entries = np.zeros((c, c))
        for i in range(c):
            slots = np.concatenate([np.arange(i), np.arange(i + 1, c)])
            chosen = rng.choice(slots, size=k, replace=False)
            vals = rng.uniform(size=k)
            entries[i, chosen] = vals / vals.sum()
        if np.all(entries.sum(axis=0) > 0.0):
            return TransitionMatrix(entries)
    raise RetriesExhausted(
        f"no full-column-support matrix in {max_tries} tries (c={c}, k={k})"
    )


def flip_posterior(q: TransitionMatrix, p: np.ndarray) -> np.ndarray:
    """Push a posterior over true classes through the flip process: Q^T p."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (q.c,):
        raise ShapeError(f"posterior shape {p.shape} does not match c={q.c}")
    return q.entries.T @ p


def sample_complementary(
    q: TransitionMatrix,
    y: int,
    rng: np.random.Generator,
    size: int | None = None,
) -> int | np.ndarray:
    """Draw complementary labels for true class y (1-based).

    Returns a single int when size is None, else an int array of that length.
    Never returns y itself because row y has a zero diagonal entry.
    """
    row = q.row(y)
    drawn = rng.choice(q.c, size=size, p=row)
    if size is None:
        return int(drawn) + 1
    return drawn.astype(np.int64) + 1


@dataclass
class InvertibilityReport:
    invertible: bool
    abs_det: float
    cond: float
    rank: int
    zero_columns: list[int]  # 1-based labels never emitted as complements

    @property
    def singular(self) -> bool:
        return not self.invertible


def check_invertible(q: TransitionMatrix) -> InvertibilityReport:
    """Classify Q as invertible or singular; singular is a warning, not an error.

    Singular means |det| < 1e-10 or numerical rank < c.  The report also
    lists all-zero columns, i.e. classes that can never appear as a
    complementary label.
    """
    entries = q.entries
    abs_det = float(abs(np.linalg.det(entries)))
    rank = int(np.linalg.matrix_rank(entries))
    cond = float(np.linalg.cond(entries))
    invertible = abs_det >= SINGULAR_DET_TOL and rank == q.c
    zero_columns = [j + 1 for j in range(q.c) if not entries[:, j].any()]
    return InvertibilityReport(invertible, abs_det, cond, rank, zero_columns)


def save(q: TransitionMatrix, path) -> None:
    """Write Q in the text format: header line `c=<int>`, then c rows."""
    lines = [f"c={q.c}"]
    for row in q.entries:
        lines.append(" ".join(format(v, ".17g") for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path) -> TransitionMatrix:
    """Read a Q text file, skipping `#` comments; re-validates all invariants."""
    rows: list[list[float]] = []
    c = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if c is None:
                if not line.startswith("c="):
                    raise ParseError(f"{path}:{lineno}: expected header 'c=<int>'")
                try:
                    c = int(line[2:])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad class count {line[2:]!r}") from None
                continue
            try:
                rows.append([float(tok) for tok in line.split()])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric entry") from None
            if len(rows[-1]) != c:
                raise ParseError(f"{path}:{lineno}: expected {c} entries, got {len(rows[-1])}")
    if c is None:
        raise ParseError(f"{path}: empty file")
    if len(rows) != c:
        raise ParseError(f"{path}: expected {c} rows, got {len(rows)}")
    return TransitionMatrix(np.array(rows))


def load_singular_fixture() -> TransitionMatrix:
    """The packaged 10-class singular matrix used by the harness scenarios.

    Two of its columns share a single support row, so the matrix is exactly
    rank 9, yet no column is all-zero.
    """
    ref = resources.files("complab").joinpath("fixtures/singular10.q")
    with resources.as_file(ref) as path:
        return load(path)
