"""Stratified cross-validation, metrics, and the feature-ablation protocol.

The cross-validation loop is leakage-safe by construction: TF-IDF is refit
on each training fold and feature standardization happens inside model
training, so held-out rows never influence fitted parameters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .datasets import CaseRecord
from .embeddings import EmbeddingProvider
from .errors import ValidationError
from .models import ModelSpec, TrainedModel, predict_batch, train
from .similarity import DEFAULT_GED_CAP, FEATURE_ORDER, feature_matrix
from .textfeat import TfidfModel, fit_tfidf, transform_tfidf
from .trajectory import WITH_ARGS, check_mode


def stratified_folds(labels, k: int, seed: int) -> list[np.ndarray]:
    """Split indices into ``k`` disjoint folds preserving class proportions.

    Within each class the indices are shuffled by ``seed`` and dealt
    round-robin, so per-fold class counts differ from the proportional
    share by less than one.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValidationError("fold count must be >= 2")
    if labels.size == 0:
        raise ValidationError("no labels to split")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        indices = rng.permutation(np.flatnonzero(labels == cls))
        for position, index in enumerate(indices):
            folds[position % k].append(int(index))
    return [np.array(sorted(fold), dtype=int) for fold in folds]


def accuracy(pred, gold) -> float:
    pred = np.asarray(pred)
    gold = np.asarray(gold)
    if pred.shape != gold.shape or pred.size == 0:
        raise ValidationError(f"length mismatch or empty: {pred.shape} vs {gold.shape}")
    return float(np.mean(pred == gold))


def _class_f1(pred: np.ndarray, gold: np.ndarray, cls: int) -> float:
    tp = int(np.sum((pred == cls) & (gold == cls)))
    fp = int(np.sum((pred == cls) & (gold != cls)))
    fn = int(np.sum((pred != cls) & (gold == cls)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def f1(pred, gold, averaging: str = "positive_class") -> float:
    """F1 score; ``positive_class`` scores label 1, ``macro`` averages both
    classes (a class absent from pred and gold alike counts as 1)."""
    pred = np.asarray(pred)
    gold = np.asarray(gold)
    if pred.shape != gold.shape or pred.size == 0:
        raise ValidationError(f"length mismatch or empty: {pred.shape} vs {gold.shape}")
    if averaging == "positive_class":
        return _class_f1(pred, gold, 1)
    if averaging == "macro":
        per_class = []
        for cls in (0, 1):
            if cls not in pred and cls not in gold:
                per_class.append(1.0)
            else:
                per_class.append(_class_f1(pred, gold, cls))
        return float(np.mean(per_class))
    raise ValidationError(f"unknown averaging {averaging!r}")


def cohens_kappa(a, b) -> float:
    """Inter-annotator chance-corrected agreement (p_o - p_e) / (1 - p_e)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.size == 0:
        raise ValidationError(f"length mismatch or empty: {a.shape} vs {b.shape}")
    n = a.size
    p_observed = float(np.mean(a == b))
    categories = np.unique(np.concatenate([a, b]))
    p_expected = sum(
        float(np.sum(a == cat)) / n * float(np.sum(b == cat)) / n for cat in categories
    )
    if p_expected == 1.0:
        return 1.0
    return (p_observed - p_expected) / (1.0 - p_expected)


@dataclass(frozen=True)
class CvProtocol:
    """Everything that pins down one cross-validation run."""

    folds: int = 10
    seeds: tuple[int, ...] = (1, 2, 3)
    mode: str = WITH_ARGS
    aggregation: str = "mean"
    include_tfidf: bool = True
    feature_subset: tuple[str, ...] | None = None
    ao_alignment: str = "prefix"
    ged_cap: int = DEFAULT_GED_CAP

    def __post_init__(self):
        check_mode(self.mode)
        if self.folds < 2:
            raise ValidationError("fold count must be >= 2")
        if not self.seeds:
            raise ValidationError("at least one seed is required")


@dataclass(frozen=True)
class CvCell:
    model: str
    seed: int
    fold: int
    accuracy: float
    f1_positive: float
    f1_macro: float
    test_size: int


@dataclass(frozen=True)
class FoldFit:
    """Everything fitted for one (seed, fold) cell; handed to observers so
    tests can check that held-out rows never leak into fitted parameters."""

    seed: int
    fold: int
    tfidf: TfidfModel | None
    train_indices: np.ndarray
    models: dict[str, TrainedModel]


@dataclass
class CvReport:
    protocol: CvProtocol
    feature_names: list[str]
    cells: list[CvCell] = field(default_factory=list)

    def model_means(self) -> dict[str, dict[str, float]]:
        """Flat arithmetic mean over all (seed, fold) cells, per model."""
        grouped: dict[str, list[CvCell]] = {}
        for cell in self.cells:
            grouped.setdefault(cell.model, []).append(cell)
        return {
            model: {
                "accuracy": float(np.mean([c.accuracy for c in cells])),
                "f1_positive": float(np.mean([c.f1_positive for c in cells])),
                "f1_macro": float(np.mean([c.f1_macro for c in cells])),
            }
            for model, cells in grouped.items()
        }

    def to_dict(self) -> dict:
        return {
            "protocol": {
                "folds": self.protocol.folds,
                "seeds": list(self.protocol.seeds),
                "mode": self.protocol.mode,
                "aggregation": self.protocol.aggregation,
                "include_tfidf": self.protocol.include_tfidf,
                "feature_subset": (
                    None
                    if self.protocol.feature_subset is None
                    else list(self.protocol.feature_subset)
                ),
            },
            "feature_names": self.feature_names,
            "cells": [
                {
                    "model": c.model,
                    "seed": c.seed,
                    "fold": c.fold,
                    "accuracy": c.accuracy,
                    "f1_positive": c.f1_positive,
                    "f1_macro": c.f1_macro,
                    "test_size": c.test_size,
                }
                for c in self.cells
            ],
            "model_means": self.model_means(),
        }


def _labels_array(records: Sequence[CaseRecord]) -> np.ndarray:
    missing = [r.id for r in records if r.label is None]
    if missing:
        raise ValidationError(f"records without labels: {missing[:5]}")
    return np.array([r.label for r in records], dtype=int)


def _select_columns(X: np.ndarray, names: list[str], subset: tuple[str, ...]) -> tuple[np.ndarray, list[str]]:
    unknown = set(subset) - set(FEATURE_ORDER)
    if unknown:
        raise ValidationError(f"unknown features in subset: {sorted(unknown)}")
    wanted = [
        i for i, name in enumerate(names) if name.split("_")[0] in subset
    ]
    if not wanted:
        raise ValidationError(f"feature subset {subset!r} selects no columns")
    return X[:, wanted], [names[i] for i in wanted]


def cross_validate(
    records: Sequence[CaseRecord],
    specs: Sequence[ModelSpec] | ModelSpec,
    protocol: CvProtocol = CvProtocol(),
    embedder: EmbeddingProvider | None = None,
    fold_observer: Callable[[FoldFit], None] | None = None,
) -> CvReport:
    """Stratified k-fold cross-validation over one or more model specs.

    For every (seed, fold) cell the TF-IDF model is fitted on the training
    questions only, models are trained on the training rows, and accuracy
    plus both F1 averagings are recorded on the held-out rows. Fully
    deterministic given the protocol seeds. ``fold_observer``, when given,
    receives a :class:`FoldFit` per cell.
    """
    if isinstance(specs, ModelSpec):
        specs = [specs]
    if not specs:
        raise ValidationError("no model specs given")
    labels = _labels_array(records)
    if len(records) < protocol.folds:
        raise ValidationError(
            f"dataset has {len(records)} cases, fewer than {protocol.folds} folds"
        )
    if len(np.unique(labels)) < 2:
        raise ValidationError("cross-validation needs both classes present")

    cases = [r.case for r in records]
    X_traj, names = feature_matrix(
        cases,
        mode=protocol.mode,
        aggregation=protocol.aggregation,
        embedder=embedder,
        ged_cap=protocol.ged_cap,
        ao_alignment=protocol.ao_alignment,
    )
    if protocol.feature_subset is not None:
        X_traj, names = _select_columns(X_traj, names, protocol.feature_subset)
    questions = [r.case.question for r in records]

    report = CvReport(protocol=protocol, feature_names=list(names))
    for seed in protocol.seeds:
        folds = stratified_folds(labels, protocol.folds, seed)
        for fold_index, test_idx in enumerate(folds):
            train_idx = np.setdiff1d(np.arange(len(records)), test_idx)
            if test_idx.size == 0:
                continue
            tfidf = None
            if protocol.include_tfidf:
                tfidf = fit_tfidf([questions[i] for i in train_idx])
                question_features = np.vstack([transform_tfidf(tfidf, q) for q in questions])
                X = np.hstack([X_traj, question_features])
            else:
                X = X_traj
            fitted: dict[str, TrainedModel] = {}
            for spec in specs:
                model = train(spec, X[train_idx], labels[train_idx])
                fitted[spec.label] = model
                pred = predict_batch(model, X[test_idx])
                gold = labels[test_idx]
                report.cells.append(
                    CvCell(
                        model=spec.label,
                        seed=seed,
                        fold=fold_index,
                        accuracy=accuracy(pred, gold),
                        f1_positive=f1(pred, gold, "positive_class"),
                        f1_macro=f1(pred, gold, "macro"),
                        test_size=int(test_idx.size),
                    )
                )
            if fold_observer is not None:
                fold_observer(
                    FoldFit(
                        seed=seed,
                        fold=fold_index,
                        tfidf=tfidf,
                        train_indices=train_idx,
                        models=fitted,
                    )
                )
    return report


def enumerate_feature_subsets(features: Sequence[str] = FEATURE_ORDER) -> list[tuple[str, ...]]:
    """All non-empty feature subsets, sizes ascending, lexicographic within."""
    subsets: list[tuple[str, ...]] = []
    for size in range(1, len(features) + 1):
        subsets.extend(itertools.combinations(features, size))
    return subsets


@dataclass
class AblationReport:
    folds: int
    seeds: tuple[int, ...]
    subsets: list[tuple[str, ...]]
    # (model, subset, seed) -> mean accuracy / f1_positive across folds
    seed_means: dict[str, dict[tuple[str, ...], dict[int, dict[str, float]]]]
    best_subsets: dict[str, list[tuple[str, ...]]]

    def summary(self) -> dict[str, list[dict]]:
        """Per model: the subsets best for every seed simultaneously, with
        their flat mean accuracy/F1 across all seeds and folds."""
        out: dict[str, list[dict]] = {}
        for model, subsets in self.best_subsets.items():
            rows = []
            for subset in subsets:
                per_seed = self.seed_means[model][subset]
                rows.append(
                    {
                        "features": list(subset),
                        "accuracy": float(np.mean([v["accuracy"] for v in per_seed.values()])),
                        "f1_positive": float(
                            np.mean([v["f1_positive"] for v in per_seed.values()])
                        ),
                    }
                )
            out[model] = rows
        return out

    def to_dict(self) -> dict:
        return {
            "protocol": {
                "folds": self.folds,
                "seeds": list(self.seeds),
                "mode": WITH_ARGS,
                "features": list(FEATURE_ORDER),
                "n_subsets": len(self.subsets),
            },
            "best_subsets": self.summary(),
            "seed_means": {
                model: {
                    "+".join(subset): {
                        str(seed): values for seed, values in per_seed.items()
                    }
                    for subset, per_seed in by_subset.items()
                }
                for model, by_subset in self.seed_means.items()
            },
        }


def ablate_features(
    records: Sequence[CaseRecord],
    specs: Sequence[ModelSpec],
    folds: int = 5,
    seeds: tuple[int, ...] = (1, 2, 3),
    embedder: EmbeddingProvider | None = None,
    ged_cap: int = DEFAULT_GED_CAP,
    ao_alignment: str = "prefix",
) -> AblationReport:
    """Evaluate every non-empty subset of the six trajectory features.

    Runs with-arguments trajectory features only (no TF-IDF). For each model
    the report keeps the subsets whose per-seed mean accuracy is maximal for
    every seed simultaneously.
    """
    labels = _labels_array(records)
    X_all, names = feature_matrix(
        [r.case for r in records],
        mode=WITH_ARGS,
        aggregation="mean",
        embedder=embedder,
        ged_cap=ged_cap,
        ao_alignment=ao_alignment,
    )
    return ablate_feature_matrix(X_all, labels, specs, folds=folds, seeds=seeds, names=names)


def ablate_feature_matrix(
    X_all: np.ndarray,
    labels: np.ndarray,
    specs: Sequence[ModelSpec],
    folds: int = 5,
    seeds: tuple[int, ...] = (1, 2, 3),
    names: Sequence[str] = FEATURE_ORDER,
) -> AblationReport:
    """Subset-search core of :func:`ablate_features` over a ready feature
    matrix whose columns are the six trajectory features."""
    if not specs:
        raise ValidationError("no model specs given")
    labels = np.asarray(labels, dtype=int)
    if list(names) != list(FEATURE_ORDER):
        raise ValidationError(f"ablation expects the columns {list(FEATURE_ORDER)}, got {list(names)}")
    if len(labels) < folds:
        raise ValidationError(f"dataset has {len(labels)} cases, fewer than {folds} folds")
    if len(np.unique(labels)) < 2:
        raise ValidationError("ablation needs both classes present")

    columns = {name: i for i, name in enumerate(names)}
    subsets = enumerate_feature_subsets()
    fold_plan = {seed: stratified_folds(labels, folds, seed) for seed in seeds}

    seed_means: dict[str, dict[tuple[str, ...], dict[int, dict[str, float]]]] = {
        spec.label: {} for spec in specs
    }
    for subset in subsets:
        X = X_all[:, [columns[name] for name in subset]]
        for spec in specs:
            per_seed: dict[int, dict[str, float]] = {}
            for seed in seeds:
                accs, f1s = [], []
                for test_idx in fold_plan[seed]:
                    if test_idx.size == 0:
                        continue
                    train_idx = np.setdiff1d(np.arange(len(labels)), test_idx)
                    model = train(spec, X[train_idx], labels[train_idx])
                    pred = predict_batch(model, X[test_idx])
                    gold = labels[test_idx]
                    accs.append(accuracy(pred, gold))
                    f1s.append(f1(pred, gold, "positive_class"))
                per_seed[seed] = {
                    "accuracy": float(np.mean(accs)),
                    "f1_positive": float(np.mean(f1s)),
                }
            seed_means[spec.label][subset] = per_seed

    best_subsets: dict[str, list[tuple[str, ...]]] = {}
    for spec in specs:
        by_subset = seed_means[spec.label]
        per_seed_best = {
            seed: max(by_subset[s][seed]["accuracy"] for s in subsets) for seed in seeds
        }
        best_subsets[spec.label] = [
            s
            for s in subsets
            if all(by_subset[s][seed]["accuracy"] == per_seed_best[seed] for seed in seeds)
        ]
    return AblationReport(
        folds=folds,
        seeds=tuple(seeds),
        subsets=subsets,
        seed_means=seed_means,
        best_subsets=best_subsets,
    )
