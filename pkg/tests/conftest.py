import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trajcheck.datasets import CaseRecord
from trajcheck.trajectory import ToolCall, Trajectory, VerificationCase


def traj(*call_specs: str) -> Trajectory:
    """Shorthand: traj("f:a=1,b=2", "g") builds the obvious trajectory."""
    calls = []
    for spec in call_specs:
        name, _, arg_text = spec.partition(":")
        args = {}
        if arg_text:
            for pair in arg_text.split(","):
                key, _, value = pair.partition("=")
                args[key] = value
        calls.append(ToolCall(name, args))
    return Trajectory(calls)


_TOPIC_WORDS = ("latency", "errors", "traffic", "uptime")
_SCOPE_WORDS = ("checkout", "billing", "search", "auth", "payments")


def separable_case_records(n_cases: int = 40, n_positive: int = 20) -> list[CaseRecord]:
    """Synthetic dataset where correct cases have alternates within edit
    distance 1 of the base and incorrect cases have alternates at distance
    >= 3. Questions draw from a small shared vocabulary uncorrelated with
    the labels."""
    records = []
    tools = ("alpha", "beta", "gamma", "delta")
    for i in range(n_cases):
        label = 1 if i < n_positive else 0
        base = Trajectory(
            [ToolCall(tools[(i + j) % 4], {"service": f"svc{i % 5}"}) for j in range(4)]
        )
        if label == 1:
            # identical, one argument changed, one call dropped: distance <= 1
            changed = list(base.calls)
            changed[-1] = ToolCall(changed[-1].name, {"service": "other"})
            alternates = (base, Trajectory(changed), Trajectory(base.calls[:-1]))
        else:
            # disjoint tools at mismatched length: distance >= 3
            alternates = (
                Trajectory([ToolCall("omega", {"x": str(j)}) for j in range(4)]),
                Trajectory([ToolCall("omega"), ToolCall("psi")]),
                Trajectory([ToolCall("psi", {"y": "9"})] * 5),
            )
        question = (
            f"check {_TOPIC_WORDS[i % len(_TOPIC_WORDS)]} for "
            f"{_SCOPE_WORDS[i % len(_SCOPE_WORDS)]} now"
        )
        case = VerificationCase(
            question=question,
            trajectory=base,
            response=f"report {i}",
            alternate_questions=tuple(f"q{i}.{j}" for j in range(3)),
            alternate_trajectories=alternates,
        )
        records.append(CaseRecord(id=f"case{i}", case=case, label=label))
    return records


@pytest.fixture
def separable_records():
    return separable_case_records()
