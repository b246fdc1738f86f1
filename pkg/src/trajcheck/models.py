"""From-scratch discriminative models over feature vectors.

Five algorithms predict binary trajectory correctness: k-nearest neighbours,
logistic regression, Gaussian naive Bayes, a Gini decision tree, and a
bootstrap random forest. Every model standardizes features with parameters
fitted on its training set, is deterministic given ``(spec, X, y)``, and
round-trips exactly through the JSON persistence format.

Tie conventions, applied uniformly: equal distances prefer the lower
training-row index, and tied votes/posteriors predict label 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

ALGORITHMS = (
    "knn",
    "logistic_regression",
    "gaussian_nb",
    "decision_tree",
    "random_forest",
)

_NEEDS_BOTH_CLASSES = ("logistic_regression", "gaussian_nb", "decision_tree", "random_forest")

DEFAULT_HYPERPARAMETERS: dict[str, dict] = {
    "knn": {"k": 5},
    "logistic_regression": {"learning_rate": 0.1, "iterations": 1000, "l2": 1.0},
    "gaussian_nb": {"var_smoothing": 1e-9},
    "decision_tree": {"max_depth": None, "min_samples_leaf": 1},
    "random_forest": {"n_trees": 100, "max_depth": None, "min_samples_leaf": 1},
}

MODEL_FORMAT = "trajcheck-model"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    """Algorithm choice plus hyperparameters and the seed all randomness
    derives from. Unset hyperparameters take the documented defaults."""

    algorithm: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0
    name: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        merged = dict(DEFAULT_HYPERPARAMETERS[self.algorithm])
        unknown = set(self.hyperparameters) - set(merged)
        if unknown:
            raise ValidationError(
                f"{self.algorithm}: unknown hyperparameters {sorted(unknown)}"
            )
        merged.update(self.hyperparameters)
        object.__setattr__(self, "hyperparameters", merged)
        hp = merged
        if self.algorithm == "knn" and hp["k"] < 1:
            raise ValidationError("knn: k must be >= 1")
        if self.algorithm == "logistic_regression" and hp["iterations"] < 1:
            raise ValidationError("logistic_regression: iterations must be >= 1")
        if self.algorithm == "random_forest" and hp["n_trees"] < 1:
            raise ValidationError("random_forest: n_trees must be >= 1")
        for key in ("min_samples_leaf",):
            if key in hp and hp[key] < 1:
                raise ValidationError(f"{self.algorithm}: {key} must be >= 1")

    @property
    def label(self) -> str:
        return self.name or self.algorithm


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray


def standardize_fit(X) -> Standardization:
    """Per-column mean and population standard deviation; a zero deviation
    is stored as 1 so constant columns standardize to 0."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("standardization needs a non-empty 2-D matrix")
    mean = X.mean(axis=0)
    std = np.sqrt(((X - mean) ** 2).mean(axis=0))
    std = np.where(std == 0.0, 1.0, std)
    return Standardization(mean=mean, std=std)


def standardize_apply(params: Standardization, X) -> np.ndarray:
    return (np.asarray(X, dtype=float) - params.mean) / params.std


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    standardization: Standardization
    params: dict
    n_features: int


def train(spec: ModelSpec, X, y) -> TrainedModel:
    """Fit ``spec`` on (X, y); deterministic given the spec's seed."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValidationError("X must be a 2-D matrix")
    if X.shape[0] != y.shape[0]:
        raise ValidationError(f"row mismatch: {X.shape[0]} features vs {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 training rows")
    if not np.isfinite(X).all():
        raise ValidationError("features contain non-finite values")
    if not np.isin(y, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1")
    y = y.astype(int)
    if spec.algorithm in _NEEDS_BOTH_CLASSES and len(np.unique(y)) < 2:
        raise ValidationError(f"{spec.algorithm} requires both classes in the training set")
    scaler = standardize_fit(X)
    Xs = standardize_apply(scaler, X)
    params = _FITTERS[spec.algorithm](spec, Xs, y)
    return TrainedModel(spec=spec, standardization=scaler, params=params, n_features=X.shape[1])


def predict(model: TrainedModel, x) -> int:
    """Binary decision for one feature vector (standardized internally)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.n_features:
        raise ValidationError(
            f"feature vector has dimension {x.shape}, expected ({model.n_features},)"
        )
    xs = standardize_apply(model.standardization, x)
    return _PREDICTORS[model.spec.algorithm](model, xs)


def predict_batch(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValidationError(
            f"feature matrix has shape {X.shape}, expected (*, {model.n_features})"
        )
    return np.array([predict(model, row) for row in X], dtype=int)


# --- k-nearest neighbours ---------------------------------------------------


def _fit_knn(spec: ModelSpec, Xs: np.ndarray, y: np.ndarray) -> dict:
    return {"X": Xs, "y": y}


def _predict_knn(model: TrainedModel, xs: np.ndarray) -> int:
    Xtr = model.params["X"]
    y = model.params["y"]
    k = min(model.spec.hyperparameters["k"], len(y))
    d2 = ((Xtr - xs) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(len(y)), d2))
    ones = int(y[order[:k]].sum())
    return 1 if 2 * ones > k else 0


# --- logistic regression ----------------------------------------------------


def _fit_logreg(spec: ModelSpec, Xs: np.ndarray, y: np.ndarray) -> dict:
    hp = spec.hyperparameters
    lr = hp["learning_rate"]
    l2 = hp["l2"]
    n, d = Xs.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(hp["iterations"]):
        z = np.clip(Xs @ w + b, -500, 500)
        p = 1.0 / (1.0 + np.exp(-z))
        err = p - y
        w -= lr * (Xs.T @ err / n + (l2 / n) * w)
        b -= lr * float(err.mean())
    return {"weights": w, "bias": b}


def _predict_logreg(model: TrainedModel, xs: np.ndarray) -> int:
    z = float(xs @ model.params["weights"] + model.params["bias"])
    p = 1.0 / (1.0 + math.exp(-max(min(z, 500.0), -500.0)))
    return 1 if p > 0.5 else 0


# --- Gaussian naive Bayes ---------------------------------------------------


def _fit_gnb(spec: ModelSpec, Xs: np.ndarray, y: np.ndarray) -> dict:
    smoothing = spec.hyperparameters["var_smoothing"]
    max_var = float(Xs.var(axis=0).max())
    eps = smoothing * max_var if max_var > 0 else smoothing
    priors, means, variances = [], [], []
    for cls in (0, 1):
        rows = Xs[y == cls]
        priors.append(len(rows) / len(y))
        means.append(rows.mean(axis=0))
        variances.append(rows.var(axis=0) + eps)
    return {
        "priors": np.array(priors),
        "means": np.array(means),
        "variances": np.array(variances),
    }


def _predict_gnb(model: TrainedModel, xs: np.ndarray) -> int:
    p = model.params
    scores = []
    for cls in (0, 1):
        var = p["variances"][cls]
        diff = xs - p["means"][cls]
        loglik = -0.5 * float(np.sum(np.log(2 * np.pi * var) + diff * diff / var))
        scores.append(math.log(p["priors"][cls]) + loglik)
    return 1 if scores[1] > scores[0] else 0


# --- decision tree / random forest -------------------------------------------


def _leaf(y: np.ndarray) -> dict:
    ones = int(y.sum())
    zeros = len(y) - ones
    return {"kind": "leaf", "label": 1 if ones > zeros else 0}


def _best_split(Xs, y, feature_indices, min_leaf):
    """Lowest weighted Gini impurity over midpoint thresholds.

    Ties resolve to the lower feature index, then the lower threshold.
    Returns (impurity, feature, threshold) or None when no split keeps
    ``min_leaf`` rows on both sides.
    """
    n = len(y)
    best = None
    for f in feature_indices:
        values = Xs[:, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        sy = y[order]
        boundaries = np.flatnonzero(sv[:-1] < sv[1:])
        if boundaries.size == 0:
            continue
        n_left = boundaries + 1
        n_right = n - n_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        boundaries = boundaries[valid]
        n_left = n_left[valid]
        n_right = n_right[valid]
        ones_left = np.cumsum(sy)[boundaries]
        ones_right = int(sy.sum()) - ones_left
        p1l = ones_left / n_left
        p1r = ones_right / n_right
        gini_left = 1.0 - p1l**2 - (1.0 - p1l) ** 2
        gini_right = 1.0 - p1r**2 - (1.0 - p1r) ** 2
        weighted = (n_left * gini_left + n_right * gini_right) / n
        pos = int(np.argmin(weighted))
        score = float(weighted[pos])
        if best is None or score < best[0]:
            b = int(boundaries[pos])
            low, high = float(sv[b]), float(sv[b + 1])
            threshold = (low + high) / 2.0
            if threshold >= high:  # adjacent floats: keep the fit-time partition
                threshold = low
            best = (score, int(f), threshold)
    return best


def _grow_tree(Xs, y, depth, max_depth, min_leaf, mtry, rng) -> dict:
    ones = int(y.sum())
    if ones == 0 or ones == len(y):
        return _leaf(y)
    if max_depth is not None and depth >= max_depth:
        return _leaf(y)
    if len(y) < 2 * min_leaf:
        return _leaf(y)
    d = Xs.shape[1]
    if mtry is not None and mtry < d:
        feature_indices = np.sort(rng.permutation(d)[:mtry])
    else:
        feature_indices = range(d)
    split = _best_split(Xs, y, feature_indices, min_leaf)
    if split is None:
        return _leaf(y)
    _, feature, threshold = split
    mask = Xs[:, feature] <= threshold
    return {
        "kind": "split",
        "feature": feature,
        "threshold": threshold,
        "left": _grow_tree(Xs[mask], y[mask], depth + 1, max_depth, min_leaf, mtry, rng),
        "right": _grow_tree(Xs[~mask], y[~mask], depth + 1, max_depth, min_leaf, mtry, rng),
    }


def _walk_tree(node: dict, xs: np.ndarray) -> int:
    while node["kind"] == "split":
        node = node["left"] if xs[node["feature"]] <= node["threshold"] else node["right"]
    return node["label"]


def _fit_tree(spec: ModelSpec, Xs: np.ndarray, y: np.ndarray) -> dict:
    hp = spec.hyperparameters
    root = _grow_tree(Xs, y, 0, hp["max_depth"], hp["min_samples_leaf"], None, None)
    return {"tree": root}


def _predict_tree(model: TrainedModel, xs: np.ndarray) -> int:
    return _walk_tree(model.params["tree"], xs)


def _fit_forest(spec: ModelSpec, Xs: np.ndarray, y: np.ndarray) -> dict:
    hp = spec.hyperparameters
    n, d = Xs.shape
    mtry = max(1, math.isqrt(d))
    trees = []
    for child in np.random.SeedSequence(spec.seed).spawn(hp["n_trees"]):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, n)
        trees.append(
            _grow_tree(Xs[idx], y[idx], 0, hp["max_depth"], hp["min_samples_leaf"], mtry, rng)
        )
    return {"trees": trees}


def _predict_forest(model: TrainedModel, xs: np.ndarray) -> int:
    trees = model.params["trees"]
    ones = sum(_walk_tree(tree, xs) for tree in trees)
    return 1 if 2 * ones > len(trees) else 0


_FITTERS = {
    "knn": _fit_knn,
    "logistic_regression": _fit_logreg,
    "gaussian_nb": _fit_gnb,
    "decision_tree": _fit_tree,
    "random_forest": _fit_forest,
}

_PREDICTORS = {
    "knn": _predict_knn,
    "logistic_regression": _predict_logreg,
    "gaussian_nb": _predict_gnb,
    "decision_tree": _predict_tree,
    "random_forest": _predict_forest,
}


# --- persistence --------------------------------------------------------------


def _params_to_jsonable(algorithm: str, params: dict):
    if algorithm == "knn":
        return {"X": params["X"].tolist(), "y": params["y"].tolist()}
    if algorithm == "logistic_regression":
        return {"weights": params["weights"].tolist(), "bias": params["bias"]}
    if algorithm == "gaussian_nb":
        return {
            "priors": params["priors"].tolist(),
            "means": params["means"].tolist(),
            "variances": params["variances"].tolist(),
        }
    return params  # tree structures are already plain dicts


def _params_from_jsonable(algorithm: str, params: dict) -> dict:
    if algorithm == "knn":
        return {
            "X": np.asarray(params["X"], dtype=float),
            "y": np.asarray(params["y"], dtype=int),
        }
    if algorithm == "logistic_regression":
        return {
            "weights": np.asarray(params["weights"], dtype=float),
            "bias": float(params["bias"]),
        }
    if algorithm == "gaussian_nb":
        return {
            "priors": np.asarray(params["priors"], dtype=float),
            "means": np.asarray(params["means"], dtype=float),
            "variances": np.asarray(params["variances"], dtype=float),
        }
    return params


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "spec": {
            "algorithm": model.spec.algorithm,
            "hyperparameters": model.spec.hyperparameters,
            "seed": model.spec.seed,
            "name": model.spec.name,
        },
        "n_features": model.n_features,
        "standardization": {
            "mean": model.standardization.mean.tolist(),
            "std": model.standardization.std.tolist(),
        },
        "params": _params_to_jsonable(model.spec.algorithm, model.params),
    }


def model_from_dict(obj: Mapping) -> TrainedModel:
    if obj.get("format") != MODEL_FORMAT:
        raise ValidationError(f"not a model file (format={obj.get('format')!r})")
    if obj.get("version") != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported model file version {obj.get('version')!r}")
    spec_obj = obj["spec"]
    spec = ModelSpec(
        algorithm=spec_obj["algorithm"],
        hyperparameters=spec_obj.get("hyperparameters", {}),
        seed=spec_obj.get("seed", 0),
        name=spec_obj.get("name"),
    )
    scaler = Standardization(
        mean=np.asarray(obj["standardization"]["mean"], dtype=float),
        std=np.asarray(obj["standardization"]["std"], dtype=float),
    )
    params = _params_from_jsonable(spec.algorithm, obj["params"])
    return TrainedModel(
        spec=spec,
        standardization=scaler,
        params=params,
        n_features=int(obj["n_features"]),
    )


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
