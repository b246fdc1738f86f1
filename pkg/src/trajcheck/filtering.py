"""Diversity filtering for generated questions.

Candidates are embedded, projected to two dimensions with exact PCA,
density-clustered, and each cluster contributes its questions nearest the
centroid. A human-supplied drop list removes unwanted survivors at the end.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingProvider, HashingEmbedder, word_tokens
from .errors import ValidationError
from .models import standardize_apply, standardize_fit
from .trajectory import QuestionRecord


def reduce_dimensions(embeddings, target_dim: int = 2) -> np.ndarray:
    """Project rows onto the top principal components of the centered data.

    Component signs are fixed by making each component's largest-magnitude
    coordinate positive, so the projection is deterministic.
    """
    X = np.asarray(embeddings, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValidationError("dimension reduction needs at least 2 rows")
    if X.shape[1] < target_dim:
        raise ValidationError(
            f"cannot reduce {X.shape[1]}-dimensional data to {target_dim} dimensions"
        )
    centered = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:target_dim].copy()
    for row in components:
        anchor = int(np.argmax(np.abs(row)))
        if row[anchor] < 0:
            row *= -1.0
    return centered @ components.T


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster labels (-1 = noise) with the points and per-cluster centroids."""

    labels: np.ndarray
    points: np.ndarray
    centroids: dict[int, np.ndarray]

    @property
    def cluster_ids(self) -> list[int]:
        return sorted(self.centroids)


def cluster(points, eps: float, min_pts: int) -> ClusterAssignment:
    """Density clustering in the DBSCAN style.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``; clusters are the connected components of core points
    plus any border points they reach. Points are scanned in index order,
    so the labelling is deterministic.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if min_pts < 1:
        raise ValidationError("min_pts must be >= 1")
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    labels = np.full(n, -1, dtype=int)
    if n == 0:
        return ClusterAssignment(labels=labels, points=X, centroids={})

    diffs = X[:, None, :] - X[None, :, :]
    within = (diffs**2).sum(axis=2) <= eps * eps
    neighborhoods = [np.flatnonzero(within[i]) for i in range(n)]

    visited = np.zeros(n, dtype=bool)
    cluster_id = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        if neighborhoods[i].size < min_pts:
            continue
        labels[i] = cluster_id
        queue = deque(int(j) for j in neighborhoods[i])
        while queue:
            j = queue.popleft()
            if labels[j] == -1:
                labels[j] = cluster_id
            if not visited[j]:
                visited[j] = True
                if neighborhoods[j].size >= min_pts:
                    queue.extend(int(t) for t in neighborhoods[j])
        cluster_id += 1

    centroids = {
        cid: X[labels == cid].mean(axis=0) for cid in range(cluster_id)
    }
    return ClusterAssignment(labels=labels, points=X, centroids=centroids)


def centroid_distances(assignment: ClusterAssignment) -> np.ndarray:
    """Euclidean distance of each point to its own cluster centroid
    (NaN for noise points)."""
    out = np.full(len(assignment.labels), np.nan)
    for cid, centroid in assignment.centroids.items():
        member = assignment.labels == cid
        out[member] = np.linalg.norm(assignment.points[member] - centroid, axis=1)
    return out


def select_representatives(
    assignment: ClusterAssignment, questions: Sequence, per_cluster: int = 5
) -> list:
    """Keep, per cluster, the ``per_cluster`` questions nearest the centroid.

    Distance ties resolve to the lower question index; clusters smaller than
    ``per_cluster`` contribute all members. Output is ordered by cluster id,
    then by distance.
    """
    if per_cluster < 1:
        raise ValidationError("per_cluster must be >= 1")
    if len(questions) != len(assignment.labels):
        raise ValidationError(
            f"{len(questions)} questions vs {len(assignment.labels)} clustered points"
        )
    distances = centroid_distances(assignment)
    selected = []
    for cid in assignment.cluster_ids:
        members = np.flatnonzero(assignment.labels == cid)
        ranked = sorted(members, key=lambda i: (distances[i], i))
        selected.extend(questions[i] for i in ranked[:per_cluster])
    return selected


@dataclass(frozen=True)
class FilterDecision:
    id: str
    cluster: int
    distance: float | None
    decision: str


def filter_pipeline(
    records: Sequence[QuestionRecord],
    embedder: EmbeddingProvider | None = None,
    *,
    eps: float = 0.5,
    min_pts: int = 3,
    per_cluster: int = 5,
    target_dim: int = 2,
    drop_ids: Sequence[str] = (),
) -> tuple[list[QuestionRecord], list[FilterDecision]]:
    """embed -> reduce -> cluster -> select, then apply the manual drop list.

    Reduced coordinates are standardized per axis before clustering so that
    ``eps`` has a stable scale regardless of the embedding provider. Returns
    the kept records plus one provenance row per input question.
    """
    embedder = embedder or HashingEmbedder(tokenizer=word_tokens)
    drop_set = set(drop_ids)
    if len(records) < 2:
        kept, report = [], []
        for record in records:
            decision = "dropped:manual" if record.id in drop_set else "kept"
            if decision == "kept":
                kept.append(record)
            report.append(FilterDecision(record.id, -1, None, decision))
        return kept, report

    embeddings = np.vstack([embedder.embed(r.question) for r in records])
    reduced = reduce_dimensions(embeddings, target_dim=target_dim)
    scaled = standardize_apply(standardize_fit(reduced), reduced)
    assignment = cluster(scaled, eps=eps, min_pts=min_pts)
    selected_indices = select_representatives(
        assignment, list(range(len(records))), per_cluster=per_cluster
    )
    selected_set = set(selected_indices)
    distances = centroid_distances(assignment)

    kept = []
    report = []
    for i, record in enumerate(records):
        cid = int(assignment.labels[i])
        distance = None if np.isnan(distances[i]) else float(distances[i])
        if cid == -1:
            decision = "dropped:noise"
        elif i not in selected_set:
            decision = "dropped:not_representative"
        elif record.id in drop_set:
            decision = "dropped:manual"
        else:
            decision = "kept"
            kept.append(record)
        report.append(FilterDecision(record.id, cid, distance, decision))
    return kept, report
