"""Readers and writers for the on-disk artifact formats.

Datasets are JSON-lines files with fields ``{id, question, label?,
trajectory, response?}``; verification cases extend a record with its
alternates; feature tables are comma-delimited text with a header row.
Numbers inside tool-call arguments keep their textual form end to end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .trajectory import (
    QuestionRecord,
    Trajectory,
    VerificationCase,
    decode_json_preserving,
    trajectory_from_obj,
    trajectory_to_obj,
)

_RECORD_FIELDS = {"id", "question", "label", "trajectory", "response"}
_CASE_FIELDS = _RECORD_FIELDS | {"alternates"}


@dataclass(frozen=True)
class CaseRecord:
    """A verification case with its dataset identity and optional label."""

    id: str
    case: VerificationCase
    label: int | None = None


def _coerce_label(value, where: str) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool):
        raise ValidationError(f"{where}: label must be 0 or 1, got {value!r}")
    if isinstance(value, str) and value in ("0", "1"):
        return int(value)
    if isinstance(value, int) and value in (0, 1):
        return value
    raise ValidationError(f"{where}: label must be 0 or 1, got {value!r}")


def _decode_line(line: str, where: str, allowed: set[str]) -> dict:
    try:
        obj = decode_json_preserving(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{where}: invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"{where}: unknown fields {sorted(unknown)}")
    for name in ("id", "question"):
        if name not in obj:
            raise ParseError(f"{where}: missing {name!r} field")
        if not isinstance(obj[name], str):
            raise ParseError(f"{where}: {name!r} must be a string")
    return obj


def _iter_lines(path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                yield number, line


def read_records(path) -> list[QuestionRecord]:
    records = []
    for number, line in _iter_lines(path):
        where = f"{Path(path).name}:{number}"
        obj = _decode_line(line, where, _RECORD_FIELDS)
        if "trajectory" not in obj:
            raise ParseError(f"{where}: missing 'trajectory' field")
        try:
            trajectory = trajectory_from_obj(obj["trajectory"])
        except (ParseError, ValidationError) as exc:
            raise type(exc)(f"{where}: {exc}") from None
        records.append(
            QuestionRecord(
                id=obj["id"],
                question=obj["question"],
                trajectory=trajectory,
                label=_coerce_label(obj.get("label"), where),
                response=obj.get("response"),
            )
        )
    return records


def record_to_obj(record: QuestionRecord) -> dict:
    obj: dict = {"id": record.id, "question": record.question}
    if record.label is not None:
        obj["label"] = record.label
    obj["trajectory"] = trajectory_to_obj(record.trajectory)
    if record.response is not None:
        obj["response"] = record.response
    return obj


def write_records(path, records: Iterable[QuestionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_obj(record), ensure_ascii=False) + "\n")


def read_cases(path) -> list[CaseRecord]:
    out = []
    for number, line in _iter_lines(path):
        where = f"{Path(path).name}:{number}"
        obj = _decode_line(line, where, _CASE_FIELDS)
        for name in ("trajectory", "response", "alternates"):
            if name not in obj:
                raise ParseError(f"{where}: missing {name!r} field")
        if not isinstance(obj["alternates"], list):
            raise ParseError(f"{where}: 'alternates' must be a list")
        try:
            base = trajectory_from_obj(obj["trajectory"])
            alternate_questions = []
            alternate_trajectories = []
            for alt in obj["alternates"]:
                if not isinstance(alt, dict) or set(alt) != {"question", "trajectory"}:
                    raise ParseError("alternate entries need exactly question and trajectory")
                alternate_questions.append(alt["question"])
                alternate_trajectories.append(trajectory_from_obj(alt["trajectory"]))
        except (ParseError, ValidationError) as exc:
            raise type(exc)(f"{where}: {exc}") from None
        case = VerificationCase(
            question=obj["question"],
            trajectory=base,
            response=obj["response"],
            alternate_questions=alternate_questions,
            alternate_trajectories=alternate_trajectories,
        )
        out.append(CaseRecord(id=obj["id"], case=case, label=_coerce_label(obj.get("label"), where)))
    return out


def case_to_obj(record: CaseRecord) -> dict:
    case = record.case
    obj: dict = {"id": record.id, "question": case.question}
    if record.label is not None:
        obj["label"] = record.label
    obj["trajectory"] = trajectory_to_obj(case.trajectory)
    obj["response"] = case.response
    obj["alternates"] = [
        {"question": q, "trajectory": trajectory_to_obj(t)}
        for q, t in zip(case.alternate_questions, case.alternate_trajectories)
    ]
    return obj


def write_cases(path, records: Iterable[CaseRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(case_to_obj(record), ensure_ascii=False) + "\n")


def write_feature_table(path, ids: Sequence[str], labels, X, names: Sequence[str]) -> None:
    """Comma-delimited feature table: ``id,label,<feature columns>``."""
    X = np.asarray(X)
    if X.shape[0] != len(ids):
        raise ValidationError(f"row mismatch: {len(ids)} ids vs {X.shape[0]} feature rows")
    if X.shape[1] != len(names):
        raise ValidationError(f"column mismatch: {len(names)} names vs {X.shape[1]} columns")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["id", "label", *names]) + "\n")
        for i, case_id in enumerate(ids):
            label = labels[i] if labels is not None else None
            cells = [case_id, "" if label is None else str(label)]
            cells.extend(str(float(v)) for v in X[i])
            fh.write(",".join(cells) + "\n")


def read_labels(path) -> dict[str, int]:
    """Annotation file: JSON lines of ``{"id": ..., "label": 0|1}``."""
    labels: dict[str, int] = {}
    for number, line in _iter_lines(path):
        where = f"{Path(path).name}:{number}"
        try:
            obj = decode_json_preserving(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{where}: invalid JSON: {exc}") from None
        if not isinstance(obj, dict) or "id" not in obj or "label" not in obj:
            raise ParseError(f"{where}: expected an object with id and label")
        label = _coerce_label(obj["label"], where)
        if label is None:
            raise ValidationError(f"{where}: label may not be null")
        labels[obj["id"]] = label
    return labels


def read_drop_list(path) -> list[str]:
    """Manual drop list: one question id per line; blank lines ignored."""
    return [line for _, line in _iter_lines(path)]
