"""From-scratch binary classifiers for the audit task.

Four algorithms: CART decision tree (Gini), random forest, k-nearest
neighbors on z-scored features, and Gaussian naive Bayes. No external ML
dependency; numpy is used only as the array substrate. Training is
deterministic given (data, seed): the RNG is the package's own named
generator, per-tree streams are derived from the seed, and every tie has a
documented break (exact vote ties go to member, the auditing-friendly side).

Models serialize to a versioned JSON document that round-trips to identical
predictions; trained models are immutable and safe for concurrent use.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggregate import FeatureSet, Label, UserFeatureVector
from .rng import GENERATOR_NAME, Rng, derive_seed

ALGORITHMS = ("dt", "rf", "knn3", "gnb")

MODEL_FORMAT = "voiceaudit-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; only k=3 is externally mandated, the rest are
    reasonable defaults."""

    seed: int = 0
    dt_max_depth: int | None = 12
    dt_min_samples_leaf: int = 2
    rf_n_trees: int = 100
    knn_k: int = 3
    gnb_variance_floor_scale: float = 1e-9

    def __post_init__(self):
        if self.knn_k < 1 or self.knn_k % 2 == 0:
            raise ValueError("knn_k must be odd and positive")
        if self.rf_n_trees < 1:
            raise ValueError("rf_n_trees must be >= 1")
        if self.dt_min_samples_leaf < 1:
            raise ValueError("dt_min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class TrainingTable:
    """Design matrix with labels; rows of X align with y (0=member)."""

    X: np.ndarray
    y: np.ndarray
    dim_names: tuple[str, ...]
    feature_set: FeatureSet

    def __post_init__(self):
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        if len(self.X) != len(self.y):
            raise ValueError("X and y row counts differ")
        if self.X.shape[1] != len(self.dim_names):
            raise ValueError("dim_names do not match X columns")

    @property
    def n_samples(self) -> int:
        return len(self.y)

    @property
    def n_dims(self) -> int:
        return self.X.shape[1]


def table_from_vectors(vectors: Sequence[UserFeatureVector]) -> TrainingTable:
    """Stack labeled user vectors into a training table."""
    if not vectors:
        raise ValueError("no vectors")
    feature_set = vectors[0].feature_set
    if any(v.feature_set is not feature_set for v in vectors):
        raise ValueError("vectors mix feature sets")
    if any(v.label is None for v in vectors):
        raise ValueError("all vectors must be labeled")
    X = np.array([v.values for v in vectors], dtype=np.float64)
    y = np.array([int(v.label) for v in vectors], dtype=np.int64)
    return TrainingTable(X=X, y=y, dim_names=feature_set.dim_names(), feature_set=feature_set)


@dataclass(frozen=True)
class AuditorModel:
    """A trained auditor: algorithm, schema, and algorithm-specific state.

    ``normalization`` holds per-dim (mean, std) and is populated only for the
    distance-based kNN; trees and naive Bayes see raw features.
    """

    algorithm: str
    feature_set: FeatureSet
    dim_names: tuple[str, ...]
    parameters: dict
    normalization: tuple[tuple[float, float], ...] | None
    train_seed: int
    rng_name: str = GENERATOR_NAME

    @property
    def n_dims(self) -> int:
        return len(self.dim_names)


# ---------------------------------------------------------------------------
# decision tree


def _gini(n0: int, n1: int) -> float:
    n = n0 + n1
    p0 = n0 / n
    p1 = n1 / n
    return 1.0 - p0 * p0 - p1 * p1


def _best_split(X, y, idx, dims, min_leaf):
    """Best (gain, dim, threshold) over candidate dims, or None.

    Thresholds are midpoints between consecutive distinct sorted values.
    Ties break to the lowest dim index (dims are scanned ascending, strict
    improvement required) and then to the lowest threshold (first optimum in
    threshold order wins).
    """
    n = len(idx)
    y_node = y[idx]
    n0_total = int(np.count_nonzero(y_node == 0))
    parent = _gini(n0_total, n - n0_total)
    best = None
    for dim in dims:
        vals = X[idx, dim]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        c0 = np.cumsum(y_node[order] == 0)
        left_n = np.arange(1, n, dtype=np.float64)
        right_n = n - left_n
        left0 = c0[:-1].astype(np.float64)
        right0 = n0_total - left0
        valid = sv[1:] != sv[:-1]
        if min_leaf > 1:
            valid &= (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        gini_left = 1.0 - (left0 / left_n) ** 2 - ((left_n - left0) / left_n) ** 2
        gini_right = 1.0 - (right0 / right_n) ** 2 - ((right_n - right0) / right_n) ** 2
        weighted = (left_n * gini_left + right_n * gini_right) / n
        weighted[~valid] = np.inf
        k = int(np.argmin(weighted))
        gain = parent - float(weighted[k])
        if best is None or gain > best[0]:
            threshold = (float(sv[k]) + float(sv[k + 1])) / 2.0
            if threshold <= float(sv[k]):  # adjacent floats: keep both sides non-empty
                threshold = float(sv[k + 1])
            best = (gain, int(dim), threshold)
    return best


def _grow_tree(X, y, idx, depth, max_depth, min_leaf, n_candidate_dims, rng):
    y_node = y[idx]
    n0 = int(np.count_nonzero(y_node == 0))
    n1 = len(idx) - n0
    exhausted = max_depth is not None and depth >= max_depth
    if exhausted or n0 == 0 or n1 == 0 or len(idx) < 2 * min_leaf:
        return {"counts": [n0, n1]}
    if n_candidate_dims is None:
        dims = range(X.shape[1])
    else:
        dims = sorted(rng.sample(range(X.shape[1]), n_candidate_dims))
    best = _best_split(X, y, idx, dims, min_leaf)
    if best is None or best[0] <= 0.0:
        return {"counts": [n0, n1]}
    _, dim, threshold = best
    goes_left = X[idx, dim] < threshold
    left = _grow_tree(X, y, idx[goes_left], depth + 1, max_depth, min_leaf, n_candidate_dims, rng)
    right = _grow_tree(X, y, idx[~goes_left], depth + 1, max_depth, min_leaf, n_candidate_dims, rng)
    return {"dim": dim, "threshold": threshold, "left": left, "right": right}


def _tree_leaf(node: dict, x) -> tuple[int, int]:
    while "dim" in node:
        node = node["left"] if x[node["dim"]] < node["threshold"] else node["right"]
    n0, n1 = node["counts"]
    return n0, n1


def _tree_depth(node: dict) -> int:
    if "dim" not in node:
        return 0
    return 1 + max(_tree_depth(node["left"]), _tree_depth(node["right"]))


# ---------------------------------------------------------------------------
# training


def _validate_table(table: TrainingTable) -> None:
    if not np.isfinite(table.X).all():
        raise ValueError("training data contains NaN or infinity")
    classes = set(int(v) for v in np.unique(table.y))
    if not classes <= {0, 1}:
        raise ValueError(f"labels must be 0/1, got {sorted(classes)}")
    if classes != {0, 1}:
        raise ValueError("training requires both member and nonmember samples")


def _fit_dt(table: TrainingTable, config: TrainConfig) -> dict:
    idx = np.arange(table.n_samples)
    root = _grow_tree(
        table.X, table.y, idx, 0, config.dt_max_depth, config.dt_min_samples_leaf, None, None
    )
    return {
        "tree": root,
        "max_depth": config.dt_max_depth,
        "min_samples_leaf": config.dt_min_samples_leaf,
    }


def _fit_rf(table: TrainingTable, config: TrainConfig) -> dict:
    n = table.n_samples
    n_candidates = math.ceil(math.sqrt(table.n_dims))
    trees = []
    for t in range(config.rf_n_trees):
        rng = Rng(derive_seed(config.seed, t))
        bootstrap = np.array([rng.randrange(n) for _ in range(n)], dtype=np.int64)
        trees.append(
            _grow_tree(
                table.X,
                table.y,
                bootstrap,
                0,
                config.dt_max_depth,
                config.dt_min_samples_leaf,
                n_candidates,
                rng,
            )
        )
    return {
        "trees": trees,
        "n_trees": config.rf_n_trees,
        "candidate_dims": n_candidates,
        "max_depth": config.dt_max_depth,
        "min_samples_leaf": config.dt_min_samples_leaf,
    }


def _normalization(X) -> tuple[tuple[float, float], ...]:
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds == 0.0, 1.0, stds)
    return tuple((float(m), float(s)) for m, s in zip(means, stds))


def _fit_knn(table: TrainingTable, config: TrainConfig, norm) -> dict:
    means = np.array([m for m, _ in norm])
    stds = np.array([s for _, s in norm])
    Z = (table.X - means) / stds
    return {
        "k": config.knn_k,
        "X": [[float(v) for v in row] for row in Z],
        "y": [int(v) for v in table.y],
    }


def _fit_gnb(table: TrainingTable, config: TrainConfig) -> dict:
    overall_var = table.X.var(axis=0)
    max_var = float(overall_var.max())
    floor = config.gnb_variance_floor_scale * max_var if max_var > 0 else 1e-9
    priors = []
    means = []
    variances = []
    for cls in (0, 1):
        rows = table.X[table.y == cls]
        priors.append(len(rows) / table.n_samples)
        means.append([float(v) for v in rows.mean(axis=0)])
        variances.append([float(max(v, floor)) for v in rows.var(axis=0)])
    return {"priors": priors, "means": means, "variances": variances, "variance_floor": floor}


def train(table: TrainingTable, algorithm: str, config: TrainConfig = TrainConfig()) -> AuditorModel:
    """Fit one of the four auditor algorithms.

    Deterministic given (table, config.seed). Raises on single-class tables
    and non-finite features.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    _validate_table(table)
    normalization = None
    if algorithm == "dt":
        parameters = _fit_dt(table, config)
    elif algorithm == "rf":
        parameters = _fit_rf(table, config)
    elif algorithm == "knn3":
        normalization = _normalization(table.X)
        parameters = _fit_knn(table, config, normalization)
    else:
        parameters = _fit_gnb(table, config)
    return AuditorModel(
        algorithm=algorithm,
        feature_set=table.feature_set,
        dim_names=table.dim_names,
        parameters=parameters,
        normalization=normalization,
        train_seed=config.seed,
    )


# ---------------------------------------------------------------------------
# prediction


def _predict_tree(parameters: dict, x) -> tuple[Label, float]:
    n0, n1 = _tree_leaf(parameters["tree"], x)
    fraction = n0 / (n0 + n1)
    return (Label.MEMBER if n0 >= n1 else Label.NONMEMBER), fraction


def _predict_rf(parameters: dict, x) -> tuple[Label, float]:
    votes = 0
    for tree in parameters["trees"]:
        n0, n1 = _tree_leaf(tree, x)
        votes += 1 if n0 >= n1 else 0
    fraction = votes / len(parameters["trees"])
    return (Label.MEMBER if fraction >= 0.5 else Label.NONMEMBER), fraction


def _predict_knn(parameters: dict, norm, x) -> tuple[Label, float]:
    means = np.array([m for m, _ in norm])
    stds = np.array([s for _, s in norm])
    z = (np.asarray(x, dtype=np.float64) - means) / stds
    stored = np.asarray(parameters["X"], dtype=np.float64)
    labels = np.asarray(parameters["y"], dtype=np.int64)
    d2 = ((stored - z) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")  # distance ties break by stored index
    k = parameters["k"]
    member_votes = int(np.count_nonzero(labels[order[:k]] == 0))
    fraction = member_votes / k
    return (Label.MEMBER if fraction >= 0.5 else Label.NONMEMBER), fraction


def _gnb_log_likelihoods(parameters: dict, x) -> tuple[float, float]:
    out = []
    for cls in (0, 1):
        mean = parameters["means"][cls]
        var = parameters["variances"][cls]
        ll = math.log(parameters["priors"][cls])
        for xi, mu, v in zip(x, mean, var):
            ll -= 0.5 * (math.log(2.0 * math.pi * v) + (xi - mu) ** 2 / v)
        out.append(ll)
    return out[0], out[1]


def _predict_gnb(parameters: dict, x) -> tuple[Label, float]:
    ll0, ll1 = _gnb_log_likelihoods(parameters, x)
    top = max(ll0, ll1)
    w0 = math.exp(ll0 - top)
    w1 = math.exp(ll1 - top)
    fraction = w0 / (w0 + w1)
    return (Label.MEMBER if ll0 >= ll1 else Label.NONMEMBER), fraction


def predict(model: AuditorModel, x: Sequence[float]) -> tuple[Label, float]:
    """Classify one feature vector.

    Returns (label, member_vote_fraction): the share of trees / neighbors
    voting member, the member share of the decision-tree leaf, or the
    normalized member posterior for naive Bayes.
    """
    vec = np.asarray(x, dtype=np.float64)
    if vec.shape != (model.n_dims,):
        raise ValueError(f"expected {model.n_dims} dims, got {vec.shape}")
    if model.algorithm == "dt":
        return _predict_tree(model.parameters, vec)
    if model.algorithm == "rf":
        return _predict_rf(model.parameters, vec)
    if model.algorithm == "knn3":
        return _predict_knn(model.parameters, model.normalization, vec)
    if model.algorithm == "gnb":
        return _predict_gnb(model.parameters, vec)
    raise ValueError(f"unknown algorithm {model.algorithm!r}")


def predict_many(model: AuditorModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized predict over rows of X -> (labels, member fractions)."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.empty(len(X), dtype=np.int64)
    fractions = np.empty(len(X), dtype=np.float64)
    for i, row in enumerate(X):
        label, fraction = predict(model, row)
        labels[i] = int(label)
        fractions[i] = fraction
    return labels, fractions


def training_accuracy(model: AuditorModel, table: TrainingTable) -> float:
    labels, _ = predict_many(model, table.X)
    return float(np.mean(labels == table.y))


# ---------------------------------------------------------------------------
# serialization


def model_to_json(model: AuditorModel) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "rng": model.rng_name,
        "algorithm": model.algorithm,
        "feature_set": model.feature_set.value,
        "dim_names": list(model.dim_names),
        "normalization": None
        if model.normalization is None
        else [[m, s] for m, s in model.normalization],
        "train_seed": model.train_seed,
        "parameters": model.parameters,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def save_model(model: AuditorModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> AuditorModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: corrupt model file ({exc.msg})") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(
            f"{path}: model version {doc.get('version')!r} unsupported "
            f"(expected {MODEL_VERSION})"
        )
    try:
        normalization = doc["normalization"]
        return AuditorModel(
            algorithm=doc["algorithm"],
            feature_set=FeatureSet(doc["feature_set"]),
            dim_names=tuple(doc["dim_names"]),
            parameters=doc["parameters"],
            normalization=None
            if normalization is None
            else tuple((float(m), float(s)) for m, s in normalization),
            train_seed=int(doc["train_seed"]),
            rng_name=doc["rng"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: corrupt model file ({exc})") from exc
