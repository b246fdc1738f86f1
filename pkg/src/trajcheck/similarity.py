"""Similarity features between a base trajectory and its alternates.

Six features are computed per (base, alternate) pair — exact match, sequence
edit distance, graph edit distance, embedding cosine similarity, argument
overlap, and longest-common-starting-sequence — then aggregated across the
alternates into the trajectory half of a feature vector. The argument-overlap
feature has no without-arguments form and is dropped in that mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .embeddings import EmbeddingProvider, HashingEmbedder
from .errors import CapacityError, ProviderError, ValidationError
from .textfeat import cosine
from .trajectory import (
    WITH_ARGS,
    WITHOUT_ARGS,
    Trajectory,
    VerificationCase,
    canonical_serialize,
    check_mode,
    trajectories_equal,
)

FEATURE_ORDER = ("em", "edit", "gedit", "ss", "ao", "lcss")

DEFAULT_GED_CAP = 15

AGGREGATIONS = ("mean", "concat")

AO_ALIGNMENTS = ("prefix", "bag")


@dataclass(frozen=True)
class TrajectoryFeatureSet:
    em: int
    edit: int
    gedit: float
    ss: float
    ao: float | None
    lcss: float

    def as_tuple(self, mode: str) -> tuple[float, ...]:
        if mode == WITHOUT_ARGS:
            return (float(self.em), float(self.edit), float(self.gedit), self.ss, self.lcss)
        return (float(self.em), float(self.edit), float(self.gedit), self.ss, self.ao, self.lcss)


def _token_ids(a: Sequence[str], b: Sequence[str]) -> tuple[list[int], list[int]]:
    table: dict[str, int] = {}
    ids_a = [table.setdefault(t, len(table)) for t in a]
    ids_b = [table.setdefault(t, len(table)) for t in b]
    return ids_a, ids_b


def exact_match(base: Trajectory, alternate: Trajectory, mode: str = WITH_ARGS) -> int:
    """1 iff the trajectories are equal in the given mode, else 0."""
    return 1 if trajectories_equal(base, alternate, mode) else 0


def edit_distance(base: Trajectory, alternate: Trajectory, mode: str = WITH_ARGS) -> int:
    """Levenshtein distance over per-call canonical tokens, unit costs."""
    ids_a, ids_b = _token_ids(base.call_tokens(mode), alternate.call_tokens(mode))
    return int(kernels.levenshtein(ids_a, ids_b))


def graph_edit_distance(
    base: Trajectory, alternate: Trajectory, mode: str = WITH_ARGS, cap: int = DEFAULT_GED_CAP
) -> float:
    """Exact edit distance between the two directed path graphs whose nodes
    are per-call canonical tokens.

    Unit costs for node insert/delete/relabel and edge insert/delete; found
    by exhaustive branch-and-bound search, so trajectory lengths are capped.
    """
    check_mode(mode)
    longest = max(len(base), len(alternate))
    if longest > cap:
        raise CapacityError(
            f"trajectory length {longest} exceeds the graph edit distance cap "
            f"{cap}; raise the cap to compare longer trajectories"
        )
    ids_a, ids_b = _token_ids(base.call_tokens(mode), alternate.call_tokens(mode))
    return float(kernels.ged_path(ids_a, ids_b))


def semantic_similarity(
    base: Trajectory,
    alternate: Trajectory,
    mode: str = WITH_ARGS,
    embedder: EmbeddingProvider | None = None,
) -> float:
    """Cosine similarity between the embedded canonical serializations.

    Identical serializations score 1 without consulting the embedder; an
    empty trajectory compared against a non-empty one scores 0.
    """
    text_a = canonical_serialize(base, mode)
    text_b = canonical_serialize(alternate, mode)
    if text_a == text_b:
        return 1.0
    if not text_a or not text_b:
        return 0.0
    embedder = embedder or HashingEmbedder()
    vec_a = np.asarray(embedder.embed(text_a), dtype=float)
    vec_b = np.asarray(embedder.embed(text_b), dtype=float)
    if vec_a.shape != vec_b.shape:
        raise ProviderError(
            f"embedding provider returned mismatched dimensions: "
            f"{vec_a.shape} vs {vec_b.shape}"
        )
    return cosine(vec_a, vec_b)


def _prefix_overlap(base: Trajectory, alternate: Trajectory) -> int:
    shared = 0
    for call_a, call_b in zip(base, alternate):
        if call_a.name != call_b.name:
            break
        shared += len(set(call_a.args) & set(call_b.args))
    return shared


def _bag_overlap(base: Trajectory, alternate: Trajectory) -> int:
    counts: dict[tuple[str, str], int] = {}
    for call in base:
        for pair in call.args:
            counts[pair] = counts.get(pair, 0) + 1
    shared = 0
    for call in alternate:
        for pair in call.args:
            left = counts.get(pair, 0)
            if left:
                counts[pair] = left - 1
                shared += 1
    return shared


def argument_overlap(base: Trajectory, alternate: Trajectory, alignment: str = "prefix") -> float:
    """F1 over shared ``name=value`` argument pairs.

    ``prefix`` alignment pairs calls position-wise along the longest common
    prefix of matching tool names; ``bag`` ignores positions and intersects
    the argument multisets of the whole trajectories. Precision divides by
    the alternate's total argument count, recall by the base's; 0 when
    neither side has arguments.
    """
    if alignment not in AO_ALIGNMENTS:
        raise ValidationError(f"unknown AO alignment {alignment!r}")
    overlap = _prefix_overlap(base, alternate) if alignment == "prefix" else _bag_overlap(base, alternate)
    total_alternate = sum(len(call.args) for call in alternate)
    total_base = sum(len(call.args) for call in base)
    if total_alternate == 0 or total_base == 0:
        return 0.0
    precision = overlap / total_alternate
    recall = overlap / total_base
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def lcss(base: Trajectory, alternate: Trajectory, mode: str = WITH_ARGS) -> float:
    """F1 of the longest common prefix of per-call canonical tokens.

    Both empty scores 1, exactly one empty scores 0, and a prefix of length
    zero scores 0.
    """
    ids_a, ids_b = _token_ids(base.call_tokens(mode), alternate.call_tokens(mode))
    if not ids_a and not ids_b:
        return 1.0
    if not ids_a or not ids_b:
        return 0.0
    length = kernels.common_prefix_len(ids_a, ids_b)
    if length == 0:
        return 0.0
    precision = length / len(ids_b)
    recall = length / len(ids_a)
    return 2 * precision * recall / (precision + recall)


def pair_features(
    base: Trajectory,
    alternate: Trajectory,
    mode: str = WITH_ARGS,
    embedder: EmbeddingProvider | None = None,
    ged_cap: int = DEFAULT_GED_CAP,
    ao_alignment: str = "prefix",
) -> TrajectoryFeatureSet:
    """All similarity features between one base/alternate pair."""
    check_mode(mode)
    return TrajectoryFeatureSet(
        em=exact_match(base, alternate, mode),
        edit=edit_distance(base, alternate, mode),
        gedit=graph_edit_distance(base, alternate, mode, cap=ged_cap),
        ss=semantic_similarity(base, alternate, mode, embedder),
        ao=argument_overlap(base, alternate, ao_alignment) if mode == WITH_ARGS else None,
        lcss=lcss(base, alternate, mode),
    )


def feature_names(mode: str = WITH_ARGS, aggregation: str = "mean", n_alternates: int = 0) -> list[str]:
    """Column names for the trajectory half of a feature vector, in order."""
    check_mode(mode)
    base = [f for f in FEATURE_ORDER if not (f == "ao" and mode == WITHOUT_ARGS)]
    if aggregation == "mean":
        return base
    if aggregation == "concat":
        return [f"{name}_{i + 1}" for i in range(n_alternates) for name in base]
    raise ValidationError(f"unknown aggregation {aggregation!r}")


def compute_case_features(
    case: VerificationCase,
    mode: str = WITH_ARGS,
    aggregation: str = "mean",
    embedder: EmbeddingProvider | None = None,
    ged_cap: int = DEFAULT_GED_CAP,
    ao_alignment: str = "prefix",
) -> np.ndarray:
    """Aggregate per-alternate feature sets into one ordered vector.

    ``mean`` averages each feature across the alternates; ``concat`` lays the
    per-alternate sets out in alternate order. Feature order within a set is
    ``em, edit, gedit, ss, ao, lcss`` (``ao`` omitted without arguments).
    """
    check_mode(mode)
    if aggregation not in AGGREGATIONS:
        raise ValidationError(f"unknown aggregation {aggregation!r}")
    if case.n_alternates == 0:
        raise ValidationError("verification case has no alternate trajectories")
    rows = [
        np.array(
            pair_features(
                case.trajectory, alternate, mode, embedder, ged_cap, ao_alignment
            ).as_tuple(mode)
        )
        for alternate in case.alternate_trajectories
    ]
    if aggregation == "mean":
        return np.mean(rows, axis=0)
    return np.concatenate(rows)


def feature_matrix(
    cases: Sequence[VerificationCase],
    mode: str = WITH_ARGS,
    aggregation: str = "mean",
    embedder: EmbeddingProvider | None = None,
    ged_cap: int = DEFAULT_GED_CAP,
    ao_alignment: str = "prefix",
) -> tuple[np.ndarray, list[str]]:
    """Stack case feature vectors into a matrix; returns (matrix, column names).

    With ``concat`` aggregation, all cases must have the same alternate count.
    """
    if not cases:
        raise ValidationError("no cases to featurize")
    counts = {case.n_alternates for case in cases}
    if aggregation == "concat" and len(counts) > 1:
        raise ValidationError(
            f"concat aggregation needs a uniform alternate count, got {sorted(counts)}"
        )
    rows = [
        compute_case_features(case, mode, aggregation, embedder, ged_cap, ao_alignment)
        for case in cases
    ]
    names = feature_names(mode, aggregation, max(counts))
    return np.vstack(rows), names
