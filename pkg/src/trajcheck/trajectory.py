"""Canonical data model for tool-call trajectories.

A trajectory is the ordered sequence of tool calls an agent makes while
answering one question. Equality is defined through a canonical string
serialization, computed either with or without the call arguments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import ParseError, ValidationError

WITH_ARGS = "with_args"
WITHOUT_ARGS = "without_args"
MODES = (WITH_ARGS, WITHOUT_ARGS)

CALL_SEPARATOR = "|"

_ESCAPED_CHARS = "\\|(),="


def _escape(text: str) -> str:
    out = []
    for ch in text:
        if ch in _ESCAPED_CHARS:
            out.append("\\")
        out.append(ch)
    return "".join(out)


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; expected one of {MODES}")
    return mode


def _value_to_text(value) -> str:
    """Render a decoded JSON argument value as text.

    Strings pass through; numbers arrive as strings already (the dataset
    decoder preserves their textual form); booleans/null use their JSON
    spelling; nested structures become canonical compact JSON.
    """
    if isinstance(value, str):
        return value
    if value is True:
        return "true"
    if value is False:
        return "false"
    if value is None:
        return "null"
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class ToolCall:
    """One tool invocation: a tool name plus named arguments.

    Names are stripped of surrounding whitespace; argument values are kept
    as text (no numeric coercion, so ``"7" != "7.0"``) with surrounding
    whitespace trimmed. Arguments are stored sorted by name, which makes
    dataclass equality agree with canonical with-arguments equality.
    """

    name: str
    args: tuple[tuple[str, str], ...] = ()

    def __init__(self, name: str, args: Mapping[str, object] | Iterable[tuple[str, object]] = ()):
        cleaned = str(name).strip()
        if not cleaned:
            raise ValidationError("tool name must be non-empty")
        if any(ch.isspace() for ch in cleaned):
            raise ValidationError(f"tool name {cleaned!r} contains whitespace")
        items = args.items() if isinstance(args, Mapping) else args
        seen: dict[str, str] = {}
        for key, value in items:
            arg_name = str(key).strip()
            if not arg_name:
                raise ValidationError(f"call {cleaned!r}: empty argument name")
            if arg_name in seen:
                raise ValidationError(
                    f"call {cleaned!r}: duplicate argument name {arg_name!r}"
                )
            seen[arg_name] = _value_to_text(value).strip()
        object.__setattr__(self, "name", cleaned)
        object.__setattr__(self, "args", tuple(sorted(seen.items())))

    def token(self, mode: str = WITH_ARGS) -> str:
        """Canonical single-call rendering in the given mode."""
        check_mode(mode)
        if mode == WITHOUT_ARGS:
            return _escape(self.name)
        rendered = ",".join(f"{_escape(k)}={_escape(v)}" for k, v in self.args)
        return f"{_escape(self.name)}({rendered})"


@dataclass(frozen=True)
class Trajectory:
    """An ordered, possibly empty, sequence of tool calls."""

    calls: tuple[ToolCall, ...] = ()

    def __init__(self, calls: Iterable[ToolCall] = ()):
        object.__setattr__(self, "calls", tuple(calls))

    def __len__(self) -> int:
        return len(self.calls)

    def __iter__(self) -> Iterator[ToolCall]:
        return iter(self.calls)

    def __getitem__(self, index):
        return self.calls[index]

    def call_tokens(self, mode: str = WITH_ARGS) -> tuple[str, ...]:
        """Per-call canonical tokens; the unit of all sequence features."""
        check_mode(mode)
        return tuple(call.token(mode) for call in self.calls)


def canonical_serialize(trajectory: Trajectory, mode: str = WITH_ARGS) -> str:
    """Deterministic, injective string form of a trajectory.

    Calls are joined in order with ``|``; separator characters occurring
    inside names or values are backslash-escaped, so distinct trajectories
    never collide in the same mode.
    """
    return CALL_SEPARATOR.join(trajectory.call_tokens(mode))


def strip_arguments(trajectory: Trajectory) -> Trajectory:
    """Same call sequence with every argument map emptied."""
    return Trajectory(ToolCall(call.name) for call in trajectory)


def trajectories_equal(a: Trajectory, b: Trajectory, mode: str = WITH_ARGS) -> bool:
    return canonical_serialize(a, mode) == canonical_serialize(b, mode)


@dataclass(frozen=True)
class QuestionRecord:
    """A question with its annotated trajectory and optional label/response."""

    id: str
    question: str
    trajectory: Trajectory = field(default_factory=Trajectory)
    label: int | None = None
    response: str | None = None

    def __post_init__(self):
        if self.label is not None and self.label not in (0, 1):
            raise ValidationError(f"record {self.id!r}: label must be 0 or 1")


@dataclass(frozen=True)
class VerificationCase:
    """A base trajectory with the alternate questions/trajectories derived
    from its response; the unit features are extracted from."""

    question: str
    trajectory: Trajectory
    response: str = ""
    alternate_questions: tuple[str, ...] = ()
    alternate_trajectories: tuple[Trajectory, ...] = ()

    def __init__(
        self,
        question: str,
        trajectory: Trajectory,
        response: str = "",
        alternate_questions: Iterable[str] = (),
        alternate_trajectories: Iterable[Trajectory] = (),
    ):
        aqs = tuple(alternate_questions)
        ats = tuple(alternate_trajectories)
        if len(aqs) != len(ats):
            raise ValidationError(
                f"alternate question/trajectory counts differ: {len(aqs)} vs {len(ats)}"
            )
        object.__setattr__(self, "question", question)
        object.__setattr__(self, "trajectory", trajectory)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "alternate_questions", aqs)
        object.__setattr__(self, "alternate_trajectories", ats)

    @property
    def n_alternates(self) -> int:
        return len(self.alternate_trajectories)


class _ArgsDict(dict):
    """Dict that remembers duplicate keys seen while decoding JSON."""

    dup_keys: tuple[str, ...] = ()


def _pairs_hook(pairs):
    out = _ArgsDict()
    dups = []
    for key, value in pairs:
        if key in out:
            dups.append(key)
        out[key] = value
    if dups:
        out.dup_keys = tuple(dups)
    return out


def decode_json_preserving(text: str):
    """``json.loads`` keeping numbers in their textual form and flagging
    duplicate object keys (needed to reject duplicate argument names)."""
    return json.loads(
        text,
        parse_float=str,
        parse_int=str,
        object_pairs_hook=_pairs_hook,
    )


def trajectory_from_obj(obj) -> Trajectory:
    """Build a Trajectory from a decoded call list; errors name the call index."""
    if not isinstance(obj, list):
        raise ParseError(f"trajectory must be a list, got {type(obj).__name__}")
    calls = []
    for index, entry in enumerate(obj):
        if not isinstance(entry, dict):
            raise ParseError(f"call {index}: expected an object, got {type(entry).__name__}")
        unknown = set(entry) - {"tool", "args"}
        if unknown:
            raise ParseError(f"call {index}: unknown fields {sorted(unknown)}")
        if "tool" not in entry:
            raise ParseError(f"call {index}: missing 'tool' field")
        name = entry["tool"]
        if not isinstance(name, str):
            raise ParseError(f"call {index}: 'tool' must be a string")
        args = entry.get("args", {})
        if not isinstance(args, dict):
            raise ParseError(f"call {index}: 'args' must be an object")
        dup_keys = getattr(args, "dup_keys", ())
        if dup_keys:
            raise ValidationError(
                f"call {index}: duplicate argument name {dup_keys[0]!r}"
            )
        try:
            calls.append(ToolCall(name, args))
        except ValidationError as exc:
            raise ValidationError(f"call {index}: {exc}") from None
    return Trajectory(calls)


def parse_trajectory(raw: str) -> Trajectory:
    """Parse the external structured-call-list text into a Trajectory.

    ``raw`` is a JSON list of ``{"tool": ..., "args": {...}}`` entries; call
    order is preserved and argument values keep their textual form.
    """
    try:
        obj = decode_json_preserving(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid trajectory text: {exc}") from None
    return trajectory_from_obj(obj)


def trajectory_to_obj(trajectory: Trajectory) -> list:
    """Inverse of :func:`trajectory_from_obj` (values stay textual)."""
    return [
        {"tool": call.name, "args": {k: v for k, v in call.args}}
        for call in trajectory
    ]
