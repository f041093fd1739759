"""Brute-force ground truth on tiny discrete problems.

Everything here exists to check the learning stack from the outside: the
expected corrected loss of a fixed prediction is evaluated in closed form,
then minimized by exhaustive search over a simplex lattice.  On an
invertible transition matrix that minimizer must land on the true class
posterior, and its argmax must pick the true best class.  None of this
shares code with the trained model beyond the matrix container itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    GridTooCoarse,
    RetriesExhausted,
    ShapeError,
    ValidationError,
)
from .transition import (
    TransitionMatrix,
    check_invertible,
    flip_posterior,
    make_uniform,
    make_with_zero,
    make_without_zero,
    sample_complementary,
)

# log clamp identical to the trained loss so risks are comparable; the
# value is restated rather than imported to keep the oracle self-contained
EPS = 1e-12

MAX_GRID_CLASSES = 5
MIN_GRID_RESOLUTION = 10
TIE_TOL = 1e-12

_SIMPLEX_TOL = 1e-9


def _check_simplex(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be a vector, got shape {v.shape}")
    if np.any(v < 0) or abs(v.sum() - 1.0) > _SIMPLEX_TOL:
        raise ValidationError(f"{name} must be a probability vector")
    return v


@dataclass
class DiscreteProblem:
    """Finite world: m feature atoms, their prior, per-atom class posteriors."""

    px: np.ndarray
    post: np.ndarray
    q: TransitionMatrix

    def __post_init__(self) -> None:
        self.px = _check_simplex(self.px, "px")
        self.post = np.asarray(self.post, dtype=np.float64)
        if self.post.ndim != 2 or self.post.shape[0] != self.px.shape[0]:
            raise ShapeError(
                f"post shape {self.post.shape} does not match {self.px.shape[0]} atoms"
            )
        if self.post.shape[1] != self.q.c:
            raise ShapeError(f"post has {self.post.shape[1]} classes, matrix has {self.q.c}")
        for i, row in enumerate(self.post):
            _check_simplex(row, f"post row {i}")

    @property
    def m(self) -> int:
        return self.px.shape[0]

    @property
    def c(self) -> int:
        return self.q.c


def conditional_risk(q: TransitionMatrix, g: np.ndarray, pbar: np.ndarray) -> float:
    """Expected corrected loss of prediction g under complementary posterior pbar.

    Computes -sum_i pbar_i log((Q^T g)_i) with the same clamp the trained
    loss applies, so values are directly comparable across the two paths.
    """
    g = _check_simplex(g, "g")
    pbar = _check_simplex(pbar, "pbar")
    if g.shape != (q.c,) or pbar.shape != (q.c,):
        raise ShapeError("g and pbar must have one entry per class")
    flipped = np.clip(g @ q.entries, EPS, None)
    return float(-(pbar * np.log(flipped)).sum())


def simplex_lattice(c: int, r: int) -> np.ndarray:
    """Every probability vector with entries in {0, 1/r, ..., 1}, one per row.

    Rows come out in lexicographically increasing order.
    """
    if c < 2:
        raise ValidationError(f"need at least 2 coordinates, got {c}")
    if r < 1:
        raise ValidationError(f"resolution must be positive, got {r}")

    def parts(total: int, slots: int):
        if slots == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in parts(total - first, slots - 1):
                yield (first,) + rest

    grid = np.array(list(parts(r, c)), dtype=np.float64)
    return grid / r


def lattice_size(c: int, r: int) -> int:
    """Number of lattice points, C(r+c-1, c-1)."""
    return math.comb(r + c - 1, c - 1)


def brute_force_minimizer(problem: DiscreteProblem, atom_idx: int, r: int) -> np.ndarray:
    """Exhaustively minimize the conditional risk for one atom over the lattice.

    Ties within TIE_TOL of the minimum are resolved to the lexicographically
    smallest point.  If tied minima disagree about the best class while the
    atom's true posterior has a unique best class, the grid cannot certify
    an argmax and GridTooCoarse is raised instead of guessing.
    """
    if not 0 <= atom_idx < problem.m:
        raise ValidationError(f"atom_idx {atom_idx} out of range for m={problem.m}")
    if r < MIN_GRID_RESOLUTION:
        raise ValidationError(f"resolution must be at least {MIN_GRID_RESOLUTION}")
    if problem.c > MAX_GRID_CLASSES:
        raise ValidationError(
            f"lattice search supports at most {MAX_GRID_CLASSES} classes, got {problem.c}"
        )
    posterior = problem.post[atom_idx]
    pbar = flip_posterior(problem.q, posterior)
    grid = simplex_lattice(problem.c, r)
    values = -(np.log(np.clip(grid @ problem.q.entries, EPS, None)) @ pbar)
    tied = grid[values <= values.min() + TIE_TOL]
    argmaxes = np.argmax(tied, axis=1)
    posterior_ties = np.flatnonzero(posterior >= posterior.max() - TIE_TOL)
    if np.unique(argmaxes).size > 1 and posterior_ties.size == 1:
        raise GridTooCoarse(
            f"{tied.shape[0]} tied minima disagree on the best class at r={r}"
        )
    return tied[0]  # lattice rows are lexicographically sorted already


def snap_to_lattice(p: np.ndarray, r: int) -> np.ndarray:
    """Nearest probability vector with entries in {0, 1/r, ..., 1}.

    Largest-remainder rounding: every coordinate moves by less than 1/r
    and the result still sums to one.
    """
    p = _check_simplex(p, "p")
    scaled = p * r
    k = np.floor(scaled).astype(np.int64)
    short = r - int(k.sum())
    if short:
        k[np.argsort(scaled - k)[::-1][:short]] += 1
    return k / r


def make_random_invertible_problem(c: int, m: int, seed: int,
                                   max_tries: int = 100,
                                   snap: int | None = None) -> DiscreteProblem:
    """Random atoms and posteriors with a well-conditioned transition matrix.

    The matrix regime is drawn at random; draws are rejected until the
    matrix is invertible with condition number at most 100.  Posteriors get
    a small uniform floor so no class is impossible at any atom.

    snap=r rounds every posterior onto the resolution-r lattice.  That is
    how certificate problems are built: when the true posterior is itself
    a grid point, exhaustive search must return it exactly, so the check
    carries no discretization slack.  Off-lattice posteriors only localize
    the minimizer to within a couple of grid steps.
    """
    if c <= 2:
        raise ValidationError(f"need more than 2 classes, got c={c}")
    if m < 1:
        raise ValidationError(f"need at least one atom, got m={m}")
    rng = np.random.default_rng(seed)
    q = None
    for attempt in range(max_tries):
        kind = rng.integers(3)
        sub = int(rng.integers(1 << 31))
        if kind == 0:
            candidate = make_uniform(c)
        elif kind == 1:
            candidate = make_without_zero(c, seed=sub)
        else:
            candidate = make_with_zero(c, k=int(rng.integers(2, c)), seed=sub)
        report = check_invertible(candidate)
        if report.invertible and report.cond <= 100.0:
            q = candidate
            break
    if q is None:
        raise RetriesExhausted(f"no well-conditioned matrix in {max_tries} draws")
    px = rng.dirichlet(np.ones(m))
    post = 0.9 * rng.dirichlet(np.ones(c), size=m) + 0.1 / c
    if snap is not None:
        post = np.vstack([snap_to_lattice(row, snap) for row in post])
    return DiscreteProblem(px, post, q)


def pushforward_check(problem: DiscreteProblem, n_per_atom: int = 1_000_000,
                      seed: int = 0) -> float:
    """Max deviation between analytic and sampled complementary posteriors.

    Per atom, true classes are drawn from the posterior and flipped through
    sample_complementary; the resulting frequencies are compared entrywise
    against Q^T p.
    """
    if n_per_atom < 1:
        raise ValidationError(f"n_per_atom must be positive, got {n_per_atom}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for row in problem.post:
        analytic = flip_posterior(problem.q, row)
        counts = rng.multinomial(n_per_atom, row)
        hist = np.zeros(problem.c, dtype=np.int64)
        for y, n_y in enumerate(counts, start=1):
            if n_y == 0:
                continue
            ybar = sample_complementary(problem.q, y, rng, size=int(n_y))
            hist += np.bincount(ybar - 1, minlength=problem.c)
        worst = max(worst, float(np.abs(hist / n_per_atom - analytic).max()))
    return worst
