"""Softmax scorers and the transition-corrected loss.

Two architectures are supported and nothing more general: a linear map and a
one-hidden-layer tanh network (input-hidden-output, hidden defaults to 3).
The scorer produces h in R^c, the softmax g, and the corrected output
q = Q^T g.  Training against a complementary label ybar minimizes

    loss = -log( max(q[ybar], EPS) )

whose gradient in h has the closed form

    d loss / d h_j = -Q[j, ybar] e^{h_j} / sum_k Q[k, ybar] e^{h_k}
                     + e^{h_j} / sum_k e^{h_k}

Both ratios are invariant to shifting h by a constant, so everything is
evaluated after subtracting max(h).  Each component of the gradient lies in
[-1, 1] and the components sum to zero.  When the first denominator is zero
(the ybar column has no mass where the model puts weight) the loss is pinned
at -log EPS and the gradient convention is the second term alone, which is
the exact gradient of the clamped surrogate.

With Q = None the same entry points compute plain softmax cross-entropy
against ordinary labels; the trainer uses that for true-label baselines and
for fitting complementary-label predictors.

Checkpoint format (text, version line first):

    complab-checkpoint v1
    arch=<linear|one_hidden>
    d=<int>
    c=<int>
    hidden=<int>            0 for linear
    param <name> <n_rows> <n_cols>
    <n_rows lines of n_cols decimals, row-major, 17 significant digits>
    ...

17 significant digits make the text round-trip bit-exact for float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ShapeError, ValidationError
from .transition import TransitionMatrix, flip_posterior

EPS = 1e-12

ARCHES = ("linear", "one_hidden")


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in))


@dataclass
class SoftmaxModel:
    """Parameterized scorer h: R^d -> R^c."""

    arch: str
    d: int
    c: int
    hidden: int
    params: dict[str, np.ndarray]

    @classmethod
    def linear(cls, d: int, c: int, seed: int | None = None) -> "SoftmaxModel":
        rng = np.random.default_rng(seed)
        params = {"W": _glorot(rng, c, d), "b": np.zeros(c)}
        return cls("linear", d, c, 0, params)

    @classmethod
    def one_hidden(cls, d: int, c: int, hidden: int = 3,
                   seed: int | None = None) -> "SoftmaxModel":
        rng = np.random.default_rng(seed)
        params = {
            "W1": _glorot(rng, hidden, d),
            "b1": np.zeros(hidden),
            "W2": _glorot(rng, c, hidden),
            "b2": np.zeros(c),
        }
        return cls("one_hidden", d, c, hidden, params)

    def copy(self) -> "SoftmaxModel":
        return SoftmaxModel(self.arch, self.d, self.c, self.hidden,
                            {k: v.copy() for k, v in self.params.items()})

    def scores_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ShapeError(f"expected (n, {self.d}) features, got {X.shape}")
        if self.arch == "linear":
            return X @ self.params["W"].T + self.params["b"]
        hidden = np.tanh(X @ self.params["W1"].T + self.params["b1"])
        return hidden @ self.params["W2"].T + self.params["b2"]

    def scores(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ShapeError(f"expected length-{self.d} feature vector, got {x.shape}")
        return self.scores_batch(x[None, :])[0]

    def assert_finite(self) -> None:
        for name, value in self.params.items():
            if not np.all(np.isfinite(value)):
                raise ValidationError(f"parameter {name} became non-finite")


def softmax(h: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis; safe for |h| up to ~700."""
    h = np.asarray(h, dtype=np.float64)
    e = np.exp(h - h.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def corrected_output(q: TransitionMatrix, g: np.ndarray) -> np.ndarray:
    """Model's predicted complementary-label distribution Q^T g."""
    return flip_posterior(q, g)


def _gather_columns(q: TransitionMatrix | None, ybar: np.ndarray, c: int) -> np.ndarray:
    """Rows of the result are Q[:, ybar_b]; identity columns when Q is None."""
    if q is None:
        return np.eye(c)[ybar - 1]
    if q.c != c:
        raise ShapeError(f"matrix is {q.c}-class, scores have c={c}")
    return q.entries[:, ybar - 1].T


def _batch_loss_grad_h(q: TransitionMatrix | None, H: np.ndarray,
                       ybar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample losses and score gradients for a batch of scores H (n, c)."""
    H = np.asarray(H, dtype=np.float64)
    ybar = np.asarray(ybar, dtype=np.int64)
    n, c = H.shape
    if np.any(ybar < 1) or np.any(ybar > c):
        raise ValidationError(f"labels must lie in 1..{c}")
    cols = _gather_columns(q, ybar, c)
    e = np.exp(H - H.max(axis=1, keepdims=True))
    den_all = e.sum(axis=1)
    den_col = (cols * e).sum(axis=1)
    g = e / den_all[:, None]
    # q[ybar] = den_col / den_all exactly: the max-shift cancels in the ratio
    losses = -np.log(np.maximum(den_col / den_all, EPS))
    grads = g.copy()
    alive = den_col > 0.0
    grads[alive] -= cols[alive] * e[alive] / den_col[alive, None]
    return losses, grads


def modified_loss(q: TransitionMatrix, h: np.ndarray, ybar: int) -> float:
    """Corrected loss -log(max((Q^T g)[ybar], EPS)) for one sample."""
    losses, _ = _batch_loss_grad_h(q, np.asarray(h, dtype=np.float64)[None, :],
                                   np.array([ybar]))
    return float(losses[0])


def loss_grad_h(q: TransitionMatrix, h: np.ndarray, ybar: int) -> np.ndarray:
    """Gradient of the corrected loss in the scores, in closed form."""
    _, grads = _batch_loss_grad_h(q, np.asarray(h, dtype=np.float64)[None, :],
                                  np.array([ybar]))
    return grads[0]


def predict(model: SoftmaxModel, x: np.ndarray) -> int:
    """Most probable class, 1-based; ties resolve to the lowest index."""
    return int(np.argmax(model.scores(x))) + 1


def predict_batch(model: SoftmaxModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(model.scores_batch(X), axis=1).astype(np.int64) + 1


@dataclass
class LossValueAndGrad:
    """Batch-mean loss with score and parameter gradients.

    grad_h holds one row per batch sample.  Away from the clamp each row has
    components in [-1, 1] summing to zero.
    """

    loss: float
    grad_h: np.ndarray
    param_grads: dict[str, np.ndarray] = field(repr=False)


def batch_loss_and_grads(model: SoftmaxModel, q: TransitionMatrix | None,
                         X: np.ndarray, ybar: np.ndarray) -> LossValueAndGrad:
    """Mean loss over the batch and its gradient in every parameter.

    q given: corrected loss against complementary labels ybar.
    q None: plain softmax cross-entropy against ordinary labels.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ShapeError("empty batch")
    if model.arch == "linear":
        H = model.scores_batch(X)
        losses, G = _batch_loss_grad_h(q, H, ybar)
        param_grads = {"W": G.T @ X / n, "b": G.mean(axis=0)}
    else:
        A = np.tanh(X @ model.params["W1"].T + model.params["b1"])
        H = A @ model.params["W2"].T + model.params["b2"]
        losses, G = _batch_loss_grad_h(q, H, ybar)
        dZ = (G @ model.params["W2"]) * (1.0 - A * A)
        param_grads = {
            "W1": dZ.T @ X / n,
            "b1": dZ.mean(axis=0),
            "W2": G.T @ A / n,
            "b2": G.mean(axis=0),
        }
    return LossValueAndGrad(float(losses.mean()), G, param_grads)


def batch_loss(model: SoftmaxModel, q: TransitionMatrix | None,
               X: np.ndarray, ybar: np.ndarray) -> float:
    """Mean loss only; the finite-difference side of grad_check."""
    H = model.scores_batch(np.asarray(X, dtype=np.float64))
    losses, _ = _batch_loss_grad_h(q, H, ybar)
    return float(losses.mean())


def grad_check(model: SoftmaxModel, q: TransitionMatrix | None,
               X: np.ndarray, ybar: np.ndarray, step: float = 1e-5) -> float:
    """Max relative error of backprop against central finite differences.

    Every parameter entry is perturbed by +-step; the relative error uses
    denominator max(|analytic|, |numeric|, 1e-8).  The numeric side only
    touches the forward loss, so it stays independent of the gradient code.
    """
    analytic = batch_loss_and_grads(model, q, X, ybar).param_grads
    worst = 0.0
    probe = model.copy()
    for name, values in probe.params.items():
        flat = values.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = batch_loss(probe, q, X, ybar)
            flat[idx] = orig - step
            down = batch_loss(probe, q, X, ybar)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * step)
            ana = analytic[name].reshape(-1)[idx]
            denom = max(abs(ana), abs(numeric), 1e-8)
            worst = max(worst, abs(ana - numeric) / denom)
    return worst


CKPT_HEADER = "complab-checkpoint v1"


def save_checkpoint(model: SoftmaxModel, path) -> None:
    lines = [
        CKPT_HEADER,
        f"arch={model.arch}",
        f"d={model.d}",
        f"c={model.c}",
        f"hidden={model.hidden}",
    ]
    for name, values in model.params.items():
        mat = np.atleast_2d(values)
        lines.append(f"param {name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(" ".join(format(v, ".17g") for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> SoftmaxModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != CKPT_HEADER:
        raise ParseError(f"{path}: not a {CKPT_HEADER!r} file")
    meta: dict[str, str] = {}
    pos = 1
    while pos < len(lines) and "=" in lines[pos]:
        key, _, value = lines[pos].partition("=")
        meta[key] = value
        pos += 1
    try:
        arch = meta["arch"]
        d, c, hidden = int(meta["d"]), int(meta["c"]), int(meta["hidden"])
    except (KeyError, ValueError):
        raise ParseError(f"{path}: incomplete header") from None
    if arch not in ARCHES:
        raise ParseError(f"{path}: unknown arch {arch!r}")
    params: dict[str, np.ndarray] = {}
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        head = lines[pos].split()
        if len(head) != 4 or head[0] != "param":
            raise ParseError(f"{path}:{pos + 1}: expected 'param <name> <rows> <cols>'")
        name, rows, cols = head[1], int(head[2]), int(head[3])
        block = lines[pos + 1:pos + 1 + rows]
        if len(block) < rows:
            raise ParseError(f"{path}: truncated parameter {name}")
        try:
            mat = np.array([[float(tok) for tok in line.split()] for line in block])
        except ValueError:
            raise ParseError(f"{path}: non-numeric value in parameter {name}") from None
        if mat.shape != (rows, cols):
            raise ParseError(f"{path}: parameter {name} shape mismatch")
        params[name] = mat[0] if rows == 1 and name.startswith("b") else mat
        pos += 1 + rows
    if arch == "linear":
        shapes = {"W": (c, d), "b": (c,)}
    else:
        shapes = {"W1": (hidden, d), "b1": (hidden,), "W2": (c, hidden), "b2": (c,)}
    if set(params) != set(shapes):
        raise ParseError(f"{path}: expected parameters {sorted(shapes)}, got {sorted(params)}")
    for name, want in shapes.items():
        if params[name].shape != want:
            raise ParseError(f"{path}: parameter {name} has shape "
                             f"{params[name].shape}, expected {want}")
    return SoftmaxModel(arch, d, c, hidden, params)
