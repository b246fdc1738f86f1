import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import traj
from trajcheck.errors import ParseError, ValidationError
from trajcheck.trajectory import (
    WITH_ARGS,
    WITHOUT_ARGS,
    QuestionRecord,
    ToolCall,
    Trajectory,
    canonical_serialize,
    parse_trajectory,
    strip_arguments,
    trajectories_equal,
    trajectory_to_obj,
)


class TestToolCall:
    def test_name_trimmed(self):
        assert ToolCall(" f ").name == "f"

    def test_empty_name_rejected(self):
        with pytest.raises(ValidationError):
            ToolCall("   ")

    def test_internal_whitespace_rejected(self):
        with pytest.raises(ValidationError):
            ToolCall("get weather")

    def test_duplicate_argument_names_rejected(self):
        with pytest.raises(ValidationError, match="duplicate argument"):
            ToolCall("f", [("x", "1"), ("x", "2")])

    def test_args_sorted_and_values_trimmed(self):
        call = ToolCall("f", {"b": " 2 ", "a": "1"})
        assert call.args == (("a", "1"), ("b", "2"))

    def test_no_numeric_coercion(self):
        assert ToolCall("f", {"x": "7"}) != ToolCall("f", {"x": "7.0"})


class TestParseTrajectory:
    def test_empty_list(self):
        assert parse_trajectory("[]") == Trajectory()

    def test_single_weather_call(self):
        parsed = parse_trajectory(
            '[{"tool": "get_current_weather", "args": {"city": "Boston"}}]'
        )
        assert len(parsed) == 1
        assert parsed[0] == ToolCall("get_current_weather", {"city": "Boston"})

    def test_duplicate_argument_is_validation_error(self):
        with pytest.raises(ValidationError, match="call 0.*duplicate argument.*'x'"):
            parse_trajectory('[{"tool": "a", "args": {"x": "1", "x": "2"}}]')

    def test_malformed_entry_names_index(self):
        with pytest.raises(ParseError, match="call 1"):
            parse_trajectory('[{"tool": "a"}, {"args": {}}]')

    def test_not_json(self):
        with pytest.raises(ParseError):
            parse_trajectory("not json")

    def test_not_a_list(self):
        with pytest.raises(ParseError):
            parse_trajectory('{"tool": "a"}')

    def test_unknown_field_rejected(self):
        with pytest.raises(ParseError, match="call 0"):
            parse_trajectory('[{"tool": "a", "extra": 1}]')

    def test_numbers_keep_textual_form(self):
        parsed = parse_trajectory('[{"tool": "f", "args": {"x": 7.0, "y": 7}}]')
        assert parsed[0].args == (("x", "7.0"), ("y", "7"))

    def test_booleans_and_null_render_as_json(self):
        parsed = parse_trajectory('[{"tool": "f", "args": {"a": true, "b": null}}]')
        assert parsed[0].args == (("a", "true"), ("b", "null"))

    def test_nested_value_becomes_canonical_json(self):
        parsed = parse_trajectory(
            '[{"tool": "f", "args": {"time_range": {"stop": "2", "start": "1"}}}]'
        )
        assert parsed[0].args == (("time_range", '{"start":"1","stop":"2"}'),)


class TestCanonicalSerialize:
    def test_empty(self):
        assert canonical_serialize(Trajectory()) == ""

    def test_args_sorted(self):
        assert canonical_serialize(traj("f:b=2,a=1"), WITH_ARGS) == "f(a=1,b=2)"

    def test_without_args_names_only(self):
        assert canonical_serialize(traj("f:a=1", "g"), WITHOUT_ARGS) == "f|g"

    def test_separator_escaped(self):
        tricky = Trajectory([ToolCall("f", {"a": "1|2"})])
        assert canonical_serialize(tricky) == "f(a=1\\|2)"

    def test_mode_checked(self):
        with pytest.raises(ValidationError):
            canonical_serialize(traj("f"), "sideways")


class TestStripArguments:
    def test_strips(self):
        assert strip_arguments(traj("f:a=1")) == traj("f")

    def test_empty(self):
        assert strip_arguments(Trajectory()) == Trajectory()

    def test_makes_calls_identical(self):
        stripped = strip_arguments(traj("f:a=1", "f:b=2"))
        assert stripped[0] == stripped[1]


class TestTrajectoriesEqual:
    def test_identical(self):
        assert trajectories_equal(traj("f:a=1"), traj("f:a=1"), WITH_ARGS)

    def test_differing_value_with_args(self):
        assert not trajectories_equal(traj("f:a=1"), traj("f:a=2"), WITH_ARGS)

    def test_differing_value_without_args(self):
        assert trajectories_equal(traj("f:a=1"), traj("f:a=2"), WITHOUT_ARGS)


class TestQuestionRecord:
    def test_label_validated(self):
        with pytest.raises(ValidationError):
            QuestionRecord(id="x", question="q", trajectory=Trajectory(), label=2)

    def test_optional_fields_default(self):
        record = QuestionRecord(id="x", question="q")
        assert record.label is None and record.response is None


# Text that exercises the escaping rules.
_nasty = st.text(
    alphabet=list("ab|(),=\\ \t7."),
    min_size=0,
    max_size=6,
)
_names = st.sampled_from(["alpha", "beta", "gamma", "a|b", "c=d"])
_calls = st.builds(
    lambda name, args: ToolCall(name, args),
    _names,
    st.dictionaries(st.sampled_from(["x", "y", "z"]), _nasty, max_size=3),
)
_trajectories = st.builds(Trajectory, st.lists(_calls, max_size=5))
_mode = st.sampled_from([WITH_ARGS, WITHOUT_ARGS])


@given(_trajectories, _trajectories, _mode)
@settings(max_examples=200)
def test_serialization_injective(a, b, mode):
    if canonical_serialize(a, mode) == canonical_serialize(b, mode):
        assert trajectories_equal(a, b, mode)
        if mode == WITH_ARGS:
            assert a == b  # with arguments the canonical form pins the value


@given(_trajectories, _mode)
@settings(max_examples=100)
def test_serialize_deterministic(t, mode):
    assert canonical_serialize(t, mode) == canonical_serialize(t, mode)


@given(_trajectories, _trajectories, _trajectories, _mode)
@settings(max_examples=200)
def test_equality_is_equivalence_relation(a, b, c, mode):
    assert trajectories_equal(a, a, mode)
    assert trajectories_equal(a, b, mode) == trajectories_equal(b, a, mode)
    if trajectories_equal(a, b, mode) and trajectories_equal(b, c, mode):
        assert trajectories_equal(a, c, mode)


@given(_trajectories)
@settings(max_examples=200)
def test_external_schema_round_trip(t):
    rendered = json.dumps(trajectory_to_obj(t))
    assert parse_trajectory(rendered) == t


@given(_trajectories, _mode)
@settings(max_examples=100)
def test_without_args_equals_with_args_on_stripped(t, mode):
    stripped = strip_arguments(t)
    assert trajectories_equal(t, stripped, WITHOUT_ARGS)
