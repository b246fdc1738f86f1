import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import traj
from oracles import ged_exhaustive, lev_recursive, prefix_f1_brute
from trajcheck.embeddings import HashingEmbedder, _bucket, call_tokens
from trajcheck.errors import CapacityError, ProviderError, ValidationError
from trajcheck.similarity import (
    FEATURE_ORDER,
    argument_overlap,
    compute_case_features,
    edit_distance,
    exact_match,
    feature_matrix,
    feature_names,
    graph_edit_distance,
    lcss,
    pair_features,
    semantic_similarity,
)
from trajcheck.trajectory import (
    WITH_ARGS,
    WITHOUT_ARGS,
    ToolCall,
    Trajectory,
    VerificationCase,
    strip_arguments,
)


class TestExactMatch:
    def test_identical(self):
        assert exact_match(traj("a", "b"), traj("a", "b")) == 1

    def test_extra_call(self):
        assert exact_match(traj("a"), traj("a", "b")) == 0

    def test_both_empty(self):
        assert exact_match(Trajectory(), Trajectory()) == 1

    def test_mode_sensitivity(self):
        assert exact_match(traj("a:x=1"), traj("a:x=2"), WITH_ARGS) == 0
        assert exact_match(traj("a:x=1"), traj("a:x=2"), WITHOUT_ARGS) == 1


class TestEditDistance:
    def test_identical(self):
        assert edit_distance(traj("a", "b", "c"), traj("a", "b", "c")) == 0

    def test_three_deletions(self):
        assert edit_distance(traj("a", "b", "c"), Trajectory()) == 3

    def test_substitute_and_insert(self):
        # frozen from the recursive edit-path oracle
        assert lev_recursive(["a", "b", "c"], ["a", "c", "d"]) == 2
        assert edit_distance(traj("a", "b", "c"), traj("a", "c", "d")) == 2

    def test_argument_differences_count_with_args(self):
        assert edit_distance(traj("a:x=1"), traj("a:x=2"), WITH_ARGS) == 1
        assert edit_distance(traj("a:x=1"), traj("a:x=2"), WITHOUT_ARGS) == 0


class TestGraphEditDistance:
    def test_identical_chains(self):
        assert graph_edit_distance(traj("a", "b", "c"), traj("a", "b", "c")) == 0.0

    def test_single_relabel(self):
        assert ged_exhaustive(["a"], ["b"]) == 1
        assert graph_edit_distance(traj("a"), traj("b")) == 1.0

    def test_tail_deletion(self):
        assert ged_exhaustive(["a", "b", "c"], ["a", "b"]) == 2
        assert graph_edit_distance(traj("a", "b", "c"), traj("a", "b")) == 2.0

    def test_empty_counts_nodes_and_edges(self):
        assert graph_edit_distance(Trajectory(), traj("a", "b", "c")) == 5.0

    def test_cap(self):
        long = Trajectory([ToolCall(f"t{i}") for i in range(16)])
        with pytest.raises(CapacityError, match="raise the cap"):
            graph_edit_distance(long, traj("a"))
        assert graph_edit_distance(long, long, cap=16) == 0.0


class TestSemanticSimilarity:
    def test_identical_serializations(self):
        assert semantic_similarity(traj("a:x=1"), traj("a:x=1")) == 1.0

    def test_orthogonal_embeddings(self):
        class Orthogonal:
            dim = 2

            def embed(self, text):
                return np.array([1.0, 0.0]) if "a" in text else np.array([0.0, 1.0])

        assert semantic_similarity(traj("a"), traj("b"), embedder=Orthogonal()) == 0.0

    def test_zero_norm_embedding(self):
        class Zero:
            dim = 4

            def embed(self, text):
                return np.zeros(4)

        assert semantic_similarity(traj("a"), traj("b"), embedder=Zero()) == 0.0

    def test_empty_conventions(self):
        assert semantic_similarity(Trajectory(), Trajectory()) == 1.0
        assert semantic_similarity(Trajectory(), traj("a")) == 0.0

    def test_dimension_mismatch_is_provider_error(self):
        class Broken:
            dim = 4

            def __init__(self):
                self.n = 0

            def embed(self, text):
                self.n += 1
                return np.zeros(3 if self.n == 1 else 4)

        with pytest.raises(ProviderError):
            semantic_similarity(traj("a"), traj("b"), embedder=Broken())

    def test_hand_computed_cosine_under_hashing_fallback(self):
        # tokens: f(x=1), g(), h(), k(); shared between the serializations:
        # f(x=1) and g(). With unit counts the cosine is 2 / (sqrt(3)*sqrt(3)).
        base = traj("f:x=1", "g", "h")
        alt = traj("f:x=1", "g", "k")
        tokens = {"f(x=1)", "g()", "h()", "k()"}
        buckets = {_bucket(t, 256) for t in tokens}
        assert len(buckets) == len(tokens)  # fixture guard: no hash collisions
        expected = 2.0 / (math.sqrt(3.0) * math.sqrt(3.0))
        got = semantic_similarity(base, alt, embedder=HashingEmbedder(dim=256))
        assert got == pytest.approx(expected, abs=1e-12)


class TestArgumentOverlap:
    def test_identical_with_arguments(self):
        assert argument_overlap(traj("f:a=1,b=2"), traj("f:a=1,b=2")) == 1.0

    def test_city_units_example(self):
        base = traj("get_forecast:city=Boston,units=F")
        alt = traj("get_forecast:city=Boston")
        # O=1, P=1/1, R=1/2 -> 2PR/(P+R) = 2/3
        assert argument_overlap(base, alt) == pytest.approx(2 / 3, abs=1e-12)

    def test_disjoint_arguments(self):
        assert argument_overlap(traj("f:a=1"), traj("f:b=2")) == 0.0

    def test_no_arguments_anywhere(self):
        assert argument_overlap(traj("f"), traj("f")) == 0.0

    def test_alignment_stops_at_name_mismatch(self):
        base = traj("f:a=1", "g:b=2")
        alt = traj("f:a=1", "h:b=2")
        # prefix covers only position 0: O=1, P=1/2, R=1/2
        assert argument_overlap(base, alt) == pytest.approx(0.5)

    def test_bag_alignment_ignores_positions(self):
        base = traj("f:a=1", "g:b=2")
        alt = traj("g:b=2", "f:a=1")
        assert argument_overlap(base, alt, alignment="prefix") == 0.0
        assert argument_overlap(base, alt, alignment="bag") == 1.0

    def test_unknown_alignment(self):
        with pytest.raises(ValidationError):
            argument_overlap(traj("f"), traj("f"), alignment="middle")


class TestLcss:
    def test_identical(self):
        assert lcss(traj("a", "b", "c"), traj("a", "b", "c")) == 1.0

    def test_two_of_three_prefix(self):
        # L=2, P=R=2/3 -> 2/3
        assert prefix_f1_brute(["t1", "t2", "t3"], ["t1", "t2", "t4"]) == pytest.approx(2 / 3)
        assert lcss(traj("t1", "t2", "t3"), traj("t1", "t2", "t4")) == pytest.approx(2 / 3)

    def test_first_calls_differ(self):
        assert lcss(traj("a", "b"), traj("b", "a")) == 0.0

    def test_empty_conventions(self):
        assert lcss(Trajectory(), Trajectory()) == 1.0
        assert lcss(Trajectory(), traj("a")) == 0.0


def _identity_case(n_alternates=3):
    base = traj("f:a=1", "g:b=2")
    return VerificationCase(
        question="q",
        trajectory=base,
        response="r",
        alternate_questions=tuple(f"aq{i}" for i in range(n_alternates)),
        alternate_trajectories=tuple(base for _ in range(n_alternates)),
    )


class TestComputeCaseFeatures:
    def test_identity_case_mean(self):
        got = compute_case_features(_identity_case(), WITH_ARGS, "mean")
        assert np.allclose(got, [1, 0, 0, 1, 1, 1])

    def test_em_mean_is_one_third(self):
        base = traj("f:a=1")
        case = VerificationCase(
            question="q",
            trajectory=base,
            response="r",
            alternate_questions=("a", "b", "c"),
            alternate_trajectories=(base, traj("g"), traj("h")),
        )
        got = compute_case_features(case, WITH_ARGS, "mean")
        assert got[FEATURE_ORDER.index("em")] == pytest.approx(1 / 3)

    def test_hand_computed_three_alternate_fixture(self):
        base = traj("a:x=1", "b:y=2")
        alt2 = traj("a:x=1")
        alt3 = traj("c:z=3", "b:y=2")
        tokens = {"a(x=1)", "b(y=2)", "c(z=3)"}
        assert len({_bucket(t, 256) for t in tokens}) == len(tokens)
        case = VerificationCase(
            question="q",
            trajectory=base,
            response="r",
            alternate_questions=("1", "2", "3"),
            alternate_trajectories=(base, alt2, alt3),
        )
        got = compute_case_features(case, WITH_ARGS, "mean")
        ss2 = 1 / math.sqrt(2)  # dot 1, norms sqrt(2) and 1
        ss3 = 0.5  # dot 1, norms sqrt(2) and sqrt(2)
        expected = [
            1 / 3,
            (0 + 1 + 1) / 3,
            (0 + 2 + 1) / 3,
            (1 + ss2 + ss3) / 3,
            (1 + 2 / 3 + 0) / 3,
            (1 + 2 / 3 + 0) / 3,
        ]
        assert np.allclose(got, expected, atol=1e-12)

    def test_concat_layout(self):
        got = compute_case_features(_identity_case(2), WITH_ARGS, "concat")
        assert got.shape == (12,)
        assert feature_names(WITH_ARGS, "concat", 2) == [
            "em_1", "edit_1", "gedit_1", "ss_1", "ao_1", "lcss_1",
            "em_2", "edit_2", "gedit_2", "ss_2", "ao_2", "lcss_2",
        ]

    def test_without_args_drops_ao(self):
        got = compute_case_features(_identity_case(), WITHOUT_ARGS, "mean")
        assert got.shape == (5,)
        assert feature_names(WITHOUT_ARGS) == ["em", "edit", "gedit", "ss", "lcss"]

    def test_zero_alternates_rejected(self):
        case = VerificationCase(question="q", trajectory=traj("f"), response="r")
        with pytest.raises(ValidationError):
            compute_case_features(case)

    def test_mean_of_identical_sets_equals_the_set(self):
        single = compute_case_features(_identity_case(1), WITH_ARGS, "mean")
        triple = compute_case_features(_identity_case(3), WITH_ARGS, "mean")
        assert np.array_equal(single, triple)


class TestFeatureMatrix:
    def test_shapes_and_names(self):
        X, names = feature_matrix([_identity_case(), _identity_case()])
        assert X.shape == (2, 6)
        assert names == list(FEATURE_ORDER)

    def test_concat_requires_uniform_alternates(self):
        with pytest.raises(ValidationError):
            feature_matrix([_identity_case(2), _identity_case(3)], aggregation="concat")


class _RegistryEmbedder:
    """Injective token-count embedder: relabeling-equivariant by design."""

    dim = 64

    def __init__(self):
        self._index = {}

    def embed(self, text):
        vec = np.zeros(self.dim)
        for token in call_tokens(text):
            vec[self._index.setdefault(token, len(self._index))] += 1.0
        return vec


_tools = st.sampled_from(["a", "b", "c"])
_calls = st.builds(
    lambda name, args: ToolCall(name, args),
    _tools,
    st.dictionaries(st.sampled_from(["x", "y"]), st.sampled_from(["1", "2"]), max_size=2),
)
_trajs = st.builds(Trajectory, st.lists(_calls, max_size=4))


@given(_trajs, _trajs)
@settings(max_examples=150, deadline=None)
def test_without_args_features_equal_with_args_on_stripped(base, alt):
    embedder = _RegistryEmbedder()
    without = pair_features(base, alt, WITHOUT_ARGS, embedder=embedder)
    stripped = pair_features(strip_arguments(base), strip_arguments(alt), WITH_ARGS, embedder=embedder)
    assert without.em == stripped.em
    assert without.edit == stripped.edit
    assert without.gedit == stripped.gedit
    assert without.ss == stripped.ss
    assert without.lcss == stripped.lcss
    assert without.ao is None


@given(_trajs, _trajs, _trajs)
@settings(max_examples=150, deadline=None)
def test_edit_distance_metric_axioms(x, y, z):
    assert edit_distance(x, x) == 0
    assert edit_distance(x, y) == edit_distance(y, x)
    assert edit_distance(x, z) <= edit_distance(x, y) + edit_distance(y, z)


@given(_trajs, _trajs)
@settings(max_examples=150, deadline=None)
def test_bounded_features(base, alt):
    features = pair_features(base, alt)
    assert features.em in (0, 1)
    assert 0.0 <= features.lcss <= 1.0
    assert 0.0 <= features.ao <= 1.0
    assert features.edit >= 0
    assert features.gedit >= 0


@given(_trajs, _trajs)
@settings(max_examples=150, deadline=None)
def test_exact_match_pins_the_distance_features(base, alt):
    features = pair_features(base, alt, WITH_ARGS)
    if features.em == 1 and len(base) > 0:
        assert features.edit == 0
        assert features.gedit == 0
        assert features.ss == 1.0
        assert features.lcss == 1.0
