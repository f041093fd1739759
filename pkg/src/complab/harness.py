"""Declarative experiments over the whole stack, plus fixed-seed verification.

An ExperimentSpec names a data source, a bias regime, a model, a training
configuration, and one of four modes:

    TL                   train on true labels with plain cross-entropy
    LM-true-Q            corrupt, then train the corrected loss with the
                         matrix that generated the labels
    LM-estimated-Q       corrupt, estimate the matrix from anchors, train
                         with the estimate
    LM-uniform-assumed   corrupt with the true matrix but train assuming
                         uniform bias (the in-framework baseline)

Information hygiene: the TL pipeline never constructs complementary labels;
the LM pipelines strip true-label provenance before training and touch true
labels only for the final test evaluation and for anchor side information,
which is the estimation method's sanctioned input.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import figures
from .datakit import (
    LabeledDataset,
    corrupt,
    load_csv,
    load_idx,
    make_blobs,
    standardize,
)
from .errors import UsageError, ValidationError
from .estimator import (
    AnchorSet,
    estimate_q,
    fit_comp_predictor,
    q_error,
)
from .model import ARCHES, SoftmaxModel, grad_check, loss_grad_h, save_checkpoint
from .oracle import brute_force_minimizer, make_random_invertible_problem
from .trainer import TrainConfig, train
from .transition import (
    REGIME_KINDS,
    TransitionMatrix,
    check_invertible,
    load_singular_fixture,
    make_uniform,
    make_with_zero,
    make_without_zero,
    sample_complementary,
)
from .transition import load as load_matrix
from .transition import save as save_matrix

MODES = ("TL", "LM-true-Q", "LM-estimated-Q", "LM-uniform-assumed")
DATA_KINDS = ("blobs", "csv", "idx")

# blobs test split comes from an independent stream derived from the train seed
TEST_SEED_OFFSET = 1_000_003


def _only_keys(section: str, blob: dict, allowed) -> dict:
    if not isinstance(blob, dict):
        raise UsageError(f"config section {section!r} must be an object")
    unknown = sorted(set(blob) - set(allowed))
    if unknown:
        raise UsageError(f"unknown {section} keys: {', '.join(unknown)}")
    return blob


def _apply_class_filter(dataset: LabeledDataset | None,
                        keep: tuple[int, ...] | None) -> LabeledDataset | None:
    """Restrict to the listed classes, relabeled 1..len(keep) in list order."""
    if dataset is None or keep is None:
        return dataset
    mapping = {int(cls): i + 1 for i, cls in enumerate(keep)}
    mask = np.isin(dataset.y, keep)
    if not mask.any():
        raise ValidationError(f"class filter {list(keep)} matches no examples")
    y = np.array([mapping[int(v)] for v in dataset.y[mask]])
    return LabeledDataset(dataset.X[mask], y, c=len(keep))


def _check_class_filter(keep) -> tuple[int, ...] | None:
    if keep is None:
        return None
    keep = tuple(int(v) for v in keep)
    if len(set(keep)) != len(keep):
        raise UsageError(f"class_filter has repeats: {list(keep)}")
    if len(keep) < 3:
        raise UsageError("class_filter must keep at least 3 classes")
    return keep


@dataclass
class BlobsData:
    """Synthetic isotropic Gaussian blobs, one per class."""

    c: int = 3
    d: int = 2
    n_per_class: int = 3334
    sigma: float = 0.5
    test_n_per_class: int = 1000
    seed: int | None = None
    class_filter: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        self.class_filter = _check_class_filter(self.class_filter)

    def load(self, default_seed: int):
        seed = default_seed if self.seed is None else self.seed
        train = make_blobs(self.c, self.d, self.n_per_class, sigma=self.sigma, seed=seed)
        test = None
        if self.test_n_per_class > 0:
            test = make_blobs(self.c, self.d, self.test_n_per_class,
                              sigma=self.sigma, seed=seed + TEST_SEED_OFFSET)
        return (_apply_class_filter(train, self.class_filter),
                _apply_class_filter(test, self.class_filter))


@dataclass
class CsvData:
    """Delimited files with a true-label column."""

    train: str = ""
    test: str | None = None
    label_col: int | str = -1
    has_header: bool | None = None
    class_filter: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not self.train:
            raise UsageError("csv data needs a train path")
        self.class_filter = _check_class_filter(self.class_filter)

    def load(self, default_seed: int):
        train = load_csv(self.train, label_col=self.label_col, has_header=self.has_header)
        test = None
        if self.test:
            test = load_csv(self.test, label_col=self.label_col, has_header=self.has_header)
            if test.c != train.c:
                raise ValidationError(
                    f"train has {train.c} classes but test has {test.c}"
                )
        return (_apply_class_filter(train, self.class_filter),
                _apply_class_filter(test, self.class_filter))


@dataclass
class IdxData:
    """Big-endian image/label file pairs."""

    train_images: str = ""
    train_labels: str = ""
    test_images: str | None = None
    test_labels: str | None = None
    class_filter: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not self.train_images or not self.train_labels:
            raise UsageError("idx data needs train_images and train_labels paths")
        if (self.test_images is None) != (self.test_labels is None):
            raise UsageError("idx test files must be given as a pair")
        self.class_filter = _check_class_filter(self.class_filter)

    def load(self, default_seed: int):
        train = load_idx(self.train_images, self.train_labels)
        test = None
        if self.test_images is not None:
            test = load_idx(self.test_images, self.test_labels)
        return (_apply_class_filter(train, self.class_filter),
                _apply_class_filter(test, self.class_filter))


_DATA_TYPES = {"blobs": BlobsData, "csv": CsvData, "idx": IdxData}


def _parse_data(blob: dict):
    kind = blob.get("kind", "blobs")
    if kind not in _DATA_TYPES:
        raise UsageError(f"data kind must be one of {DATA_KINDS}, got {kind!r}")
    cls = _DATA_TYPES[kind]
    allowed = {f.name for f in fields(cls)} | {"kind"}
    raw = dict(_only_keys("data", blob, allowed))
    raw.pop("kind", None)
    if "class_filter" in raw and raw["class_filter"] is not None:
        raw["class_filter"] = tuple(raw["class_filter"])
    try:
        return cls(**raw)
    except TypeError as exc:
        raise UsageError(f"bad data section: {exc}") from None


@dataclass
class RegimeSpec:
    """Which transition matrix to use and how to build it."""

    kind: str = "uniform"
    k: int | None = None
    seed: int | None = None
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in REGIME_KINDS:
            raise UsageError(f"regime kind must be one of {REGIME_KINDS}, got {self.kind!r}")
        if self.kind == "manual" and not self.path:
            raise UsageError("manual regime needs a path to a matrix file")
        if self.kind == "with0" and self.k is None:
            raise UsageError("with0 regime needs k")

    def build(self, c: int, default_seed: int) -> TransitionMatrix:
        seed = default_seed if self.seed is None else self.seed
        if self.kind == "uniform":
            return make_uniform(c)
        if self.kind == "without0":
            return make_without_zero(c, seed=seed)
        if self.kind == "with0":
            return make_with_zero(c, k=self.k, seed=seed)
        q = load_matrix(self.path)
        if q.c != c:
            raise ValidationError(f"matrix file is {q.c}-class, data has c={c}")
        return q


@dataclass
class ModelSpec:
    arch: str = "linear"
    hidden: int = 3

    def __post_init__(self) -> None:
        if self.arch not in ARCHES:
            raise UsageError(f"model arch must be one of {ARCHES}, got {self.arch!r}")
        if self.hidden < 1:
            raise UsageError(f"hidden must be positive, got {self.hidden}")

    def build(self, d: int, c: int, seed: int) -> SoftmaxModel:
        if self.arch == "linear":
            return SoftmaxModel.linear(d, c, seed=seed)
        return SoftmaxModel.one_hidden(d, c, hidden=self.hidden, seed=seed)


@dataclass
class AnchorSpec:
    """Anchor side information for the estimated-matrix mode."""

    per_class: int = 10
    seed: int | None = None
    path: str | None = None  # file or directory; None samples from the pool
    predictor_arch: str = "one_hidden"
    predictor_hidden: int = 32

    def __post_init__(self) -> None:
        if self.per_class < 1:
            raise UsageError(f"per_class must be positive, got {self.per_class}")
        if self.predictor_arch not in ARCHES:
            raise UsageError(f"predictor arch must be one of {ARCHES}")

    def resolve(self, pool: LabeledDataset, default_seed: int) -> AnchorSet:
        if self.path is not None:
            target = Path(self.path)
            if target.is_dir():
                return AnchorSet.from_dir(target)
            return AnchorSet.from_csv(target)
        seed = default_seed if self.seed is None else self.seed
        return AnchorSet.from_labeled(pool, per_class=self.per_class, seed=seed)


@dataclass
class ExperimentSpec:
    """Everything one training run needs, resolvable from a JSON config."""

    name: str = "experiment"
    mode: str = "TL"
    data: BlobsData | CsvData | IdxData = field(default_factory=BlobsData)
    regime: RegimeSpec | None = None
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    anchors: AnchorSpec = field(default_factory=AnchorSpec)
    standardize: bool = False
    seed: int = 0
    out: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode != "TL" and self.regime is None:
            raise UsageError(f"mode {self.mode} needs a regime section")

    @classmethod
    def from_json_dict(cls, blob: dict) -> "ExperimentSpec":
        top = _only_keys("config", blob, (
            "name", "mode", "data", "regime", "model", "train",
            "anchors", "standardize", "seed", "out",
        ))
        kwargs = {
            "name": str(top.get("name", "experiment")),
            "mode": top.get("mode", "TL"),
            "standardize": bool(top.get("standardize", False)),
            "seed": int(top.get("seed", 0)),
            "out": top.get("out"),
            "data": _parse_data(top.get("data") or {}),
        }
        if top.get("regime") is not None:
            regime = _only_keys("regime", top["regime"], ("kind", "k", "seed", "path"))
            kwargs["regime"] = RegimeSpec(**regime)
        model = _only_keys("model", top.get("model") or {}, ("arch", "hidden"))
        kwargs["model"] = ModelSpec(**model)
        anchors = _only_keys("anchors", top.get("anchors") or {}, (
            "per_class", "seed", "path", "predictor_arch", "predictor_hidden",
        ))
        kwargs["anchors"] = AnchorSpec(**anchors)
        train_blob = dict(_only_keys(
            "train", top.get("train") or {},
            {f.name for f in fields(TrainConfig)},
        ))
        if "lr_drops" in train_blob:
            train_blob["lr_drops"] = tuple(tuple(p) for p in train_blob["lr_drops"])
        kwargs["train"] = TrainConfig(**train_blob)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                blob = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(blob, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        return cls.from_json_dict(blob)

    def resolved(self) -> dict:
        """Full config as plain JSON types, embedded in every report."""
        blob = dataclasses.asdict(self)
        blob["data"] = {"kind": _kind_of(self.data), **blob["data"]}
        blob["train"]["lr_drops"] = [list(p) for p in self.train.lr_drops]
        if blob["data"].get("class_filter") is not None:
            blob["data"]["class_filter"] = list(blob["data"]["class_filter"])
        return blob


def _kind_of(data) -> str:
    for kind, cls in _DATA_TYPES.items():
        if isinstance(data, cls):
            return kind
    raise UsageError(f"unsupported data object {type(data).__name__}")


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def dump_json(blob: dict, path) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return str(path)


def format_matrix(entries, title: str | None = None, decimals: int = 3) -> str:
    """Aligned text heat-table of one matrix, rows labeled by true class."""
    entries = np.asarray(entries, dtype=float)
    c = entries.shape[0]
    width = decimals + 2
    lines = []
    if title:
        lines.append(title)
    header = "      " + " ".join(f"{'~' + str(j + 1):>{width}}" for j in range(c))
    lines.append(header)
    for i in range(c):
        cells = " ".join(f"{entries[i, j]:>{width}.{decimals}f}" for j in range(c))
        lines.append(f"y={i + 1:<3} {cells}")
    return "\n".join(lines)


def format_matrices(blocks: list[tuple[str, np.ndarray]], decimals: int = 3,
                    gap: str = "    ") -> str:
    """Several heat-tables side by side for terminal comparison."""
    rendered = [format_matrix(m, title, decimals).splitlines() for title, m in blocks]
    height = max(len(r) for r in rendered)
    widths = [max(len(line) for line in r) for r in rendered]
    for r, w in zip(rendered, widths):
        r += [""] * (height - len(r))
        for i, line in enumerate(r):
            r[i] = line.ljust(w)
    return "\n".join(gap.join(r[i] for r in rendered) for i in range(height))


def estimate_from_comp(spec: ExperimentSpec, comp, anchor_pool: LabeledDataset | None):
    """Fit the complementary-label predictor, then average anchor outputs.

    anchor_pool supplies anchors only when spec.anchors does not point at
    anchor files; estimation itself sees complementary labels exclusively.
    """
    predictor = fit_comp_predictor(
        comp,
        arch=spec.anchors.predictor_arch,
        config=spec.train,
        hidden=spec.anchors.predictor_hidden,
    )
    if anchor_pool is None and spec.anchors.path is None:
        raise UsageError("no anchor files configured and no labeled pool to draw from")
    anchor_set = spec.anchors.resolve(anchor_pool, spec.seed)
    return estimate_q(predictor, anchor_set)


def run_on_data(spec: ExperimentSpec, clean_train: LabeledDataset,
                test: LabeledDataset | None):
    """Execute spec.mode on already-loaded data.

    Returns (report dict, best model, matrices dict).  The matrices dict
    carries whatever transition matrices the run produced, for writers.
    """
    started = time.perf_counter()
    if spec.standardize:
        if test is None:
            (clean_train,), _ = standardize(clean_train)
        else:
            (clean_train, test), _ = standardize(clean_train, test)
    c, d = clean_train.c, clean_train.d
    model = spec.model.build(d, c, spec.seed)
    report = {
        "name": spec.name,
        "mode": spec.mode,
        "seed": spec.seed,
        "config": spec.resolved(),
        "n_train": clean_train.n,
        "n_test": None if test is None else test.n,
        "c": c,
        "d": d,
    }
    matrices: dict[str, TransitionMatrix] = {}

    if spec.mode == "TL":
        best, train_report = train(model, None, clean_train, spec.train, test_set=test)
    else:
        q_true = spec.regime.build(c, spec.seed)
        matrices["true"] = q_true
        inv = check_invertible(q_true)
        report["q_true"] = {
            "entries": q_true.entries.tolist(),
            "invertible": inv.invertible,
            "abs_det": inv.abs_det,
            "cond": inv.cond,
            "rank": inv.rank,
            "zero_columns": inv.zero_columns,
        }
        comp = corrupt(clean_train, q_true, seed=spec.seed).without_provenance()
        if spec.mode == "LM-true-Q":
            q_used = q_true
        elif spec.mode == "LM-uniform-assumed":
            q_used = make_uniform(c)
            matrices["assumed"] = q_used
        else:
            estimate = estimate_from_comp(spec, comp, clean_train)
            q_used = estimate.projected
            matrices["estimated"] = q_used
            report["q_est"] = {
                "raw": estimate.raw.tolist(),
                "projected": estimate.projected.entries.tolist(),
                "anchor_counts": list(estimate.anchor_counts),
                "diagnostics": estimate.diagnostics,
                "error_vs_true": q_error(estimate.projected, q_true),
            }
        best, train_report = train(model, q_used, comp, spec.train, test_set=test)

    report["train"] = train_report.to_json_dict()
    report["best_epoch"] = train_report.best_epoch
    report["best_val_acc"] = train_report.best_val_acc
    report["test_acc"] = train_report.test_acc
    report["seconds"] = time.perf_counter() - started
    return report, best, matrices


def write_experiment_outputs(out_dir, report: dict, best: SoftmaxModel,
                             matrices: dict[str, TransitionMatrix]) -> dict:
    """Write the stable file set; returns {label: path}."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    save_checkpoint(best, out_dir / "model.ckpt")
    paths["model"] = str(out_dir / "model.ckpt")
    if "true" in matrices:
        save_matrix(matrices["true"], out_dir / "q_true.txt")
        paths["q_true"] = str(out_dir / "q_true.txt")
    if "estimated" in matrices:
        save_matrix(matrices["estimated"], out_dir / "q_est.txt")
        paths["q_est"] = str(out_dir / "q_est.txt")
    epochs = [e["epoch"] for e in report["train"]["epochs"]]
    losses = [e["train_loss"] for e in report["train"]["epochs"]]
    accs = [e["val_acc"] for e in report["train"]["epochs"]]
    paths["loss_curve"] = figures.save_loss_curve(
        epochs, losses, accs, out_dir / "loss_curve.png",
        title=f"{report['name']} ({report['mode']})",
    )
    if matrices:
        blocks = [(label, q.entries) for label, q in matrices.items()]
        paths["matrices"] = figures.save_matrix_heatmaps(blocks, out_dir / "q_matrices.png")
    report["outputs"] = paths
    paths["report"] = dump_json(report, out_dir / "report.json")
    return paths


def flip_frequencies(comp) -> np.ndarray:
    """Empirical complementary-label frequencies per true class.

    Needs corruption provenance; rows with no examples stay zero.
    """
    if comp.y_true is None:
        raise ValidationError("flip frequencies need true-label provenance")
    freq = np.zeros((comp.c, comp.c))
    for y in range(1, comp.c + 1):
        mask = comp.y_true == y
        if mask.any():
            freq[y - 1] = np.bincount(comp.ybar[mask] - 1, minlength=comp.c) / mask.sum()
    return freq


def run_estimation(spec: ExperimentSpec, comp=None, q_true=None):
    """Standalone matrix estimation; returns (report, estimate, true matrix).

    Without a supplied complementary dataset, spec.data is corrupted under
    spec.regime, so the truth is known and the error report is always
    present.  A supplied dataset is used as-is and the truth is whatever
    the caller passes (possibly nothing).
    """
    started = time.perf_counter()
    pool = None
    if comp is None:
        if spec.regime is None:
            raise UsageError("estimation from a config alone needs a regime section")
        pool, _ = spec.data.load(spec.seed)
        if spec.standardize:
            (pool,), _ = standardize(pool)
        q_true = spec.regime.build(pool.c, spec.seed)
        comp = corrupt(pool, q_true, seed=spec.seed).without_provenance()
    estimate = estimate_from_comp(spec, comp, pool)
    report = {
        "name": spec.name,
        "seed": spec.seed,
        "config": spec.resolved(),
        "n_comp": comp.n,
        "c": comp.c,
        "d": comp.d,
        "raw": estimate.raw.tolist(),
        "projected": estimate.projected.entries.tolist(),
        "anchor_counts": list(estimate.anchor_counts),
        "diagnostics": estimate.diagnostics,
    }
    if q_true is not None:
        report["q_true"] = q_true.entries.tolist()
        report["error_vs_true"] = q_error(estimate.projected, q_true)
    report["seconds"] = time.perf_counter() - started
    return report, estimate, q_true


def write_estimation_outputs(out_dir, report: dict, estimate,
                             q_true: TransitionMatrix | None) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    save_matrix(estimate.projected, out_dir / "q_est.txt")
    paths["q_est"] = str(out_dir / "q_est.txt")
    blocks = [("estimated", estimate.projected.entries)]
    if q_true is not None:
        save_matrix(q_true, out_dir / "q_true.txt")
        paths["q_true"] = str(out_dir / "q_true.txt")
        blocks.insert(0, ("true", q_true.entries))
    paths["matrices"] = figures.save_matrix_heatmaps(blocks, out_dir / "q_matrices.png")
    report["outputs"] = paths
    paths["report"] = dump_json(report, out_dir / "report.json")
    return paths


def run_experiment(spec: ExperimentSpec, out: str | None = None) -> dict:
    """Load spec.data, run spec.mode, optionally write the file set."""
    clean_train, test = spec.data.load(spec.seed)
    report, best, matrices = run_on_data(spec, clean_train, test)
    target = out if out is not None else spec.out
    if target is not None:
        write_experiment_outputs(target, report, best, matrices)
    return report


def run_learning_curve(spec: ExperimentSpec, sizes: list[int],
                       seeds: tuple[int, ...] = (0, 1, 2),
                       regimes: tuple[str, ...] = ("uniform", "with0")) -> dict:
    """Accuracy as a function of training-set size, uniform vs sparse bias.

    Per seed the pool is drawn once and one permutation fixes nested
    subsamples, so each curve point trains on a superset of the previous
    one; at size == pool size the subsample is the identity and the result
    matches a plain training run of the same spec.
    """
    sizes = sorted(int(s) for s in sizes)
    if not sizes or sizes[0] < 2:
        raise UsageError("sizes must contain values >= 2")
    if not seeds:
        raise UsageError("need at least one seed")
    with0_k = 2
    if spec.regime is not None and spec.regime.kind == "with0":
        with0_k = spec.regime.k
    regime_specs = {}
    for kind in regimes:
        if kind == "with0":
            regime_specs[kind] = RegimeSpec(kind="with0", k=with0_k)
        else:
            regime_specs[kind] = RegimeSpec(kind=kind)

    accuracies = {kind: [] for kind in regime_specs}
    for seed in seeds:
        data = spec.data
        if hasattr(data, "seed"):
            data = dataclasses.replace(data, seed=None)
        pool, test = data.load(seed)
        if test is None:
            raise UsageError("learning curves need a test set")
        if sizes[-1] > pool.n:
            raise UsageError(f"size {sizes[-1]} exceeds pool of {pool.n}")
        perm = np.random.default_rng(seed).permutation(pool.n)
        for kind, regime in regime_specs.items():
            run_accs = []
            for size in sizes:
                subset = pool.take(np.sort(perm[:size]))
                sub_spec = dataclasses.replace(
                    spec, mode="LM-true-Q", regime=regime, seed=seed, out=None,
                )
                report, _, _ = run_on_data(sub_spec, subset, test)
                run_accs.append(report["test_acc"])
            accuracies[kind].append(run_accs)

    medians = {
        kind: [float(np.median([run[i] for run in runs])) for i in range(len(sizes))]
        for kind, runs in accuracies.items()
    }
    return {
        "name": spec.name,
        "sizes": sizes,
        "seeds": list(seeds),
        "config": spec.resolved(),
        "accuracies": accuracies,
        "medians": medians,
    }


def write_learning_curve_outputs(out_dir, curve: dict) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    rows = ["size," + ",".join(
        f"{kind}_median" for kind in curve["medians"]
    )]
    for i, size in enumerate(curve["sizes"]):
        cells = [str(size)] + [f"{curve['medians'][kind][i]:.6f}" for kind in curve["medians"]]
        rows.append(",".join(cells))
    (out_dir / "curve.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    paths["curve"] = str(out_dir / "curve.csv")
    paths["figure"] = figures.save_learning_curve(
        curve["sizes"], curve["medians"], curve["accuracies"],
        out_dir / "learning_curve.png",
    )
    curve["outputs"] = paths
    paths["report"] = dump_json(curve, out_dir / "report.json")
    return paths


def format_curve_table(curve: dict) -> str:
    kinds = list(curve["medians"])
    width = max(len(k) for k in kinds) + 8
    lines = ["size".ljust(8) + "".join(f"{k + ' median':>{width}}" for k in kinds)]
    for i, size in enumerate(curve["sizes"]):
        cells = "".join(f"{curve['medians'][k][i]:>{width}.4f}" for k in kinds)
        lines.append(f"{size:<8}" + cells)
    return "\n".join(lines)


@dataclass
class VerifyResult:
    suite: str
    passed: bool
    details: dict
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        facts = ", ".join(f"{k}={v}" for k, v in self.details.items())
        return f"[{status}] {self.suite}: {facts} ({self.seconds:.1f}s)"


def _random_full_support_matrix(rng: np.random.Generator, c: int) -> TransitionMatrix:
    kind = int(rng.integers(3))
    if kind == 0:
        return make_uniform(c)
    if kind == 1:
        return make_without_zero(c, seed=int(rng.integers(1 << 31)))
    return make_with_zero(c, k=int(rng.integers(2, c)), seed=int(rng.integers(1 << 31)))


def verify_gradcheck(cases: int = 100, step: float = 1e-5, tol: float = 1e-4,
                     seed: int = 0) -> VerifyResult:
    """Analytic parameter gradients vs central finite differences."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for case in range(cases):
        c = int(rng.integers(3, 7))
        d = int(rng.integers(2, 7))
        q = _random_full_support_matrix(rng, c)
        init = int(rng.integers(1 << 31))
        if case % 2 == 0:
            model = SoftmaxModel.linear(d, c, seed=init)
        else:
            model = SoftmaxModel.one_hidden(d, c, hidden=int(rng.integers(2, 6)), seed=init)
        n = int(rng.integers(1, 5))
        scale = float(rng.choice([0.3, 1.0, 3.0]))
        X = rng.normal(scale=scale, size=(n, d))
        ybar = rng.integers(1, c + 1, size=n)
        worst = max(worst, float(grad_check(model, q, X, ybar, step=step)))
    return VerifyResult(
        "gradcheck", worst <= tol,
        {"cases": cases, "worst_rel_err": f"{worst:.2e}", "tol": f"{tol:.0e}"},
        time.perf_counter() - started,
    )


def verify_lipschitz(samples: int = 10_000, sum_tol: float = 1e-9,
                     seed: int = 0) -> VerifyResult:
    """Every score-gradient component in [-1, 1] and components sum to zero."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    lo, hi, worst_sum = 0.0, 0.0, 0.0
    q = None
    for i in range(samples):
        if i % 250 == 0:
            c = int(rng.integers(3, 9))
            q = _random_full_support_matrix(rng, c)
        scale = float(rng.choice([0.1, 1.0, 10.0, 100.0]))
        h = rng.normal(scale=scale, size=q.c)
        ybar = int(rng.integers(1, q.c + 1))
        grad = loss_grad_h(q, h, ybar)
        lo = min(lo, float(grad.min()))
        hi = max(hi, float(grad.max()))
        worst_sum = max(worst_sum, abs(float(grad.sum())))
    passed = lo >= -1.0 and hi <= 1.0 and worst_sum <= sum_tol
    return VerifyResult(
        "lipschitz", passed,
        {"samples": samples, "min": f"{lo:.6f}", "max": f"{hi:.6f}",
         "worst_sum": f"{worst_sum:.2e}"},
        time.perf_counter() - started,
    )


def verify_oracle(problems: int = 20, r: int = 50, atoms: int = 5,
                  seed: int = 0) -> VerifyResult:
    """Lattice argmin recovers the class posterior on invertible problems."""
    started = time.perf_counter()
    worst = 0.0
    argmax_mismatches = 0
    checked = 0
    for i in range(problems):
        c = 3 if i % 2 == 0 else 4
        problem = make_random_invertible_problem(c, m=atoms, seed=seed + i, snap=r)
        for atom in range(problem.m):
            got = brute_force_minimizer(problem, atom, r)
            p = problem.post[atom]
            worst = max(worst, float(np.abs(got - p).max()))
            if np.flatnonzero(p >= p.max() - 1e-9).size == 1:
                checked += 1
                if int(np.argmax(got)) != int(np.argmax(p)):
                    argmax_mismatches += 1
    passed = worst <= 1.0 / r + 1e-12 and argmax_mismatches == 0
    return VerifyResult(
        "oracle", passed,
        {"problems": problems, "r": r, "worst_linf": f"{worst:.2e}",
         "argmax_checked": checked, "argmax_mismatches": argmax_mismatches},
        time.perf_counter() - started,
    )


def verify_pushforward(draws: int = 1_000_000, tol: float = 0.005,
                       seed: int = 0) -> VerifyResult:
    """Per-class sampled complementary frequencies match matrix rows."""
    started = time.perf_counter()
    matrices = {
        "uniform": make_uniform(10),
        "without0": make_without_zero(10, seed=1),
        "with0": make_with_zero(10, k=3, seed=7),
        "singular_fixture": load_singular_fixture(),
    }
    rng = np.random.default_rng(seed)
    worst = {}
    for label, q in matrices.items():
        dev = 0.0
        for y in range(1, q.c + 1):
            ybar = sample_complementary(q, y, rng, size=draws)
            freq = np.bincount(ybar - 1, minlength=q.c) / draws
            dev = max(dev, float(np.abs(freq - q.entries[y - 1]).max()))
        worst[label] = dev
    passed = all(dev <= tol for dev in worst.values())
    return VerifyResult(
        "pushforward", passed,
        {"draws_per_class": draws,
         **{f"dev_{label}": f"{dev:.4f}" for label, dev in worst.items()}},
        time.perf_counter() - started,
    )


VERIFY_SUITES = {
    "gradcheck": verify_gradcheck,
    "lipschitz": verify_lipschitz,
    "oracle": verify_oracle,
    "pushforward": verify_pushforward,
}


def run_verify(names: list[str], seed: int = 0) -> list[VerifyResult]:
    unknown = sorted(set(names) - set(VERIFY_SUITES))
    if unknown:
        raise UsageError(f"unknown verify suites: {', '.join(unknown)}")
    return [VERIFY_SUITES[name](seed=seed) for name in names]
