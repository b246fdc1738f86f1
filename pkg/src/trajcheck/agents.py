"""Agent roles, LLM-client contract, and verification-case assembly.

Three roles cooperate: an investigator writes candidate questions from a
worked example, an assistant answers questions through a tool loop, and a
reverse engineer derives alternate questions from a response. A judge
baseline scores (question, trajectory) pairs directly. All roles speak to
an :class:`LlmClient`; with the scripted mock every operation here is
bit-deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

from .errors import (
    CaseAssemblyError,
    GenerationError,
    JudgeParseError,
    StepCapError,
    ToolResolutionError,
    TransportError,
    ValidationError,
)
from .trajectory import (
    WITH_ARGS,
    QuestionRecord,
    ToolCall,
    Trajectory,
    VerificationCase,
    canonical_serialize,
    decode_json_preserving,
)

log = logging.getLogger(__name__)

Message = Mapping[str, str]

DEFAULT_JUDGE_SYSTEM_PROMPT = "You are a helpful AI Assistant."


class LlmClient(Protocol):
    def complete(
        self,
        messages: Sequence[Message],
        *,
        system_prompt: str | None = None,
        temperature: float = 0.0,
    ) -> str: ...


class ToolExecutor(Protocol):
    def describe(self) -> str: ...

    def execute(self, name: str, args: Mapping[str, str]) -> str: ...


def request_fingerprint(
    messages: Sequence[Message],
    system_prompt: str | None = None,
    temperature: float = 0.0,
) -> str:
    """Stable hash of a chat request, used to key mock script entries."""
    payload = json.dumps(
        {
            "system": system_prompt,
            "messages": [
                {"role": m["role"], "content": m["content"]} for m in messages
            ],
            "temperature": temperature,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:32]


class MockLlmClient:
    """Scripted client replaying canned responses.

    Script entries are ``{"response": ...}`` objects, optionally keyed by
    ``"fingerprint"`` (served statelessly whenever the request matches) or
    pinned to a call position with ``"index"``. Unkeyed entries are consumed
    in order. Safe for concurrent use; fingerprint lookups do not consume.
    """

    def __init__(self, entries: Sequence[Mapping]):
        self._by_fingerprint: dict[str, str] = {}
        self._queue: list[tuple[int | None, str]] = []
        for entry in entries:
            if "response" not in entry:
                raise ValidationError("mock script entry is missing 'response'")
            if "fingerprint" in entry:
                self._by_fingerprint[entry["fingerprint"]] = entry["response"]
            else:
                index = entry.get("index")
                self._queue.append((None if index is None else int(index), entry["response"]))
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_file(cls, path) -> "MockLlmClient":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def complete(self, messages, *, system_prompt=None, temperature=0.0) -> str:
        fingerprint = request_fingerprint(messages, system_prompt, temperature)
        with self._lock:
            position = self.calls
            self.calls += 1
            hit = self._by_fingerprint.get(fingerprint)
            if hit is not None:
                return hit
            if self._queue:
                index, response = self._queue[0]
                if index is not None and index != position:
                    raise TransportError(
                        f"mock script entry is pinned to call {index}, got call {position}"
                    )
                self._queue.pop(0)
                return response
        raise TransportError(
            f"mock script has no response for request {fingerprint} (call #{position})"
        )


class TranscriptLoggingClient:
    """Wraps a client and appends one JSON line per exchange to a log file."""

    def __init__(self, inner: LlmClient, path):
        self.inner = inner
        self.path = path
        self._lock = threading.Lock()

    def complete(self, messages, *, system_prompt=None, temperature=0.0) -> str:
        response = self.inner.complete(
            messages, system_prompt=system_prompt, temperature=temperature
        )
        line = json.dumps(
            {
                "fingerprint": request_fingerprint(messages, system_prompt, temperature),
                "system": system_prompt,
                "messages": [
                    {"role": m["role"], "content": m["content"]} for m in messages
                ],
                "temperature": temperature,
                "response": response,
            },
            ensure_ascii=False,
        )
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return response


class RecordingClient:
    """Wraps a client and records fingerprint-keyed script entries."""

    def __init__(self, inner: LlmClient):
        self.inner = inner
        self.entries: list[dict] = []
        self._seen: dict[str, str] = {}
        self._lock = threading.Lock()

    def complete(self, messages, *, system_prompt=None, temperature=0.0) -> str:
        text = self.inner.complete(
            messages, system_prompt=system_prompt, temperature=temperature
        )
        fingerprint = request_fingerprint(messages, system_prompt, temperature)
        with self._lock:
            if fingerprint not in self._seen:
                self._seen[fingerprint] = text
                self.entries.append({"fingerprint": fingerprint, "response": text})
        return text

    def save_script(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.entries, fh, indent=2, ensure_ascii=False)
            fh.write("\n")


class HttpChatClient:
    """Client for an OpenAI-style ``/chat/completions`` endpoint.

    Bounds in-flight requests with a semaphore and retries transient
    transport failures up to ``retry_cap`` times. The credential comes from
    the environment variable named by ``api_key_env``.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "TRAJCHECK_API_KEY",
        retry_cap: int = 2,
        concurrency: int = 4,
        backoff: float = 0.5,
        transport: Callable[[str, dict, bytes], dict] | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.retry_cap = retry_cap
        self.backoff = backoff
        self._sem = threading.Semaphore(concurrency)
        self._transport = transport or _http_post_json

    def complete(self, messages, *, system_prompt=None, temperature=0.0) -> str:
        chat = []
        if system_prompt is not None:
            chat.append({"role": "system", "content": system_prompt})
        chat.extend({"role": m["role"], "content": m["content"]} for m in messages)
        body = json.dumps(
            {"model": self.model, "messages": chat, "temperature": temperature}
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = f"{self.endpoint}/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.retry_cap + 1):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                with self._sem:
                    response = self._transport(url, headers, body)
                break
            except TransportError as exc:
                last_error = exc
        else:
            raise TransportError(f"chat request failed after retries: {last_error}")
        try:
            content = response["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise TransportError(f"malformed chat response: {response!r}") from None
        if not isinstance(content, str):
            raise TransportError(f"chat response content is not text: {content!r}")
        return content


def _http_post_json(url: str, headers: dict, body: bytes) -> dict:
    request = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(request, timeout=120) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
        raise TransportError(str(exc)) from None


# --- assistant tool loop -------------------------------------------------------


@dataclass(frozen=True)
class AgentRun:
    """One assistant run: the question, the tool calls made in order, the
    final answer, and the raw message transcript."""

    question: str
    trajectory: Trajectory
    response: str
    transcript: tuple[dict, ...] = ()


ASSISTANT_SYSTEM_TEMPLATE = """You are an assistant that answers questions by calling tools.

Available tools:
{tools}

To call a tool, reply with exactly one JSON object of the form
{{"tool": "<tool name>", "args": {{"<argument>": "<value>"}}}}.
Once you have enough information, reply with {{"answer": "<your final answer>"}}.
Reply with a single JSON object and nothing else."""

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)


def _parse_agent_action(text: str):
    """Classify a model reply as ("call", ToolCall) or ("answer", str)."""
    stripped = text.strip()
    fenced = _FENCE_RE.match(stripped)
    if fenced:
        stripped = fenced.group(1).strip()
    try:
        obj = decode_json_preserving(stripped)
    except json.JSONDecodeError:
        return "answer", text.strip()
    if isinstance(obj, dict) and "tool" in obj:
        name = obj["tool"]
        args = obj.get("args", {})
        if not isinstance(name, str) or not isinstance(args, dict):
            return "answer", text.strip()
        return "call", ToolCall(name, args)
    if isinstance(obj, dict) and "answer" in obj:
        answer = obj["answer"]
        return "answer", answer if isinstance(answer, str) else str(answer)
    return "answer", text.strip()


def answer_question(
    question: str,
    client: LlmClient,
    executor: ToolExecutor,
    *,
    step_cap: int = 10,
    temperature: float = 0.0,
    system_prompt: str | None = None,
) -> AgentRun:
    """Run the model <-> tool loop until a final answer or the step cap.

    Hitting the cap raises :class:`StepCapError` carrying the partial run;
    a call to an unknown tool raises :class:`ToolResolutionError`.
    """
    if system_prompt is None:
        system_prompt = ASSISTANT_SYSTEM_TEMPLATE.format(tools=executor.describe())
    messages: list[dict] = [{"role": "user", "content": question}]
    calls: list[ToolCall] = []
    while True:
        reply = client.complete(
            messages, system_prompt=system_prompt, temperature=temperature
        )
        messages.append({"role": "assistant", "content": reply})
        kind, payload = _parse_agent_action(reply)
        if kind == "answer":
            return AgentRun(
                question=question,
                trajectory=Trajectory(calls),
                response=payload,
                transcript=tuple(messages),
            )
        if len(calls) >= step_cap:
            partial = AgentRun(
                question=question,
                trajectory=Trajectory(calls),
                response="",
                transcript=tuple(messages),
            )
            raise StepCapError(
                f"step cap of {step_cap} tool calls reached without a final answer",
                run=partial,
            )
        result = executor.execute(payload.name, dict(payload.args))
        calls.append(payload)
        messages.append({"role": "tool", "content": result})


def most_common_trajectory(
    runs: Sequence[AgentRun], mode: str = WITH_ARGS, seed: int = 0
) -> tuple[Trajectory, str]:
    """Group runs by trajectory equality and return the modal trajectory.

    Size ties break toward the lexicographically smallest canonical
    serialization; the returned response is sampled seed-deterministically
    from the winning group.
    """
    if not runs:
        raise ValidationError("most_common_trajectory needs at least one run")
    groups: dict[str, list[AgentRun]] = {}
    for run in runs:
        groups.setdefault(canonical_serialize(run.trajectory, mode), []).append(run)
    largest = max(len(members) for members in groups.values())
    winner_key = min(key for key, members in groups.items() if len(members) == largest)
    winners = groups[winner_key]
    chosen = random.Random(seed).choice(winners)
    return winners[0].trajectory, chosen.response


# --- question generation -------------------------------------------------------


INVESTIGATOR_PROMPT_TEMPLATE = """You write test questions for a tool-using assistant.

Here is a worked example. The question:
{seed_question}

was answered with this sequence of tool calls:
{seed_trajectory}

Below is a different sequence of tool calls that was just executed, with the
response each call returned:
{target_runs}

Study those tool responses and write {n} questions, similar in style to the
example question, that would naturally be answered using this new sequence of
tool calls. Reply with a numbered list ({n} lines, one question per line) and
nothing else."""

REVERSE_PROMPT_TEMPLATE = """An assistant produced the following response:

{response}

Write {n} questions that this response would fully answer. Together the
questions must capture all of the main points of the response. Reply with a
numbered list ({n} lines, one question per line) and nothing else."""

RETRY_NUDGE_TEMPLATE = (
    "That reply did not contain {n} usable questions. "
    "Reply again with a numbered list of exactly {n} questions."
)

_NUMBERED_RE = re.compile(r"^\s*\d+\s*[.):]\s*(.+?)\s*$")


def parse_numbered_list(text: str) -> list[str]:
    items = []
    for line in text.splitlines():
        match = _NUMBERED_RE.match(line)
        if match:
            items.append(match.group(1))
    return items


def format_trajectory_readable(trajectory: Trajectory) -> str:
    """Human-readable call list used inside prompts."""
    if not len(trajectory):
        return "(no tool calls)"
    lines = []
    for call in trajectory:
        rendered = ", ".join(f"{k}={v}" for k, v in call.args)
        lines.append(f"- {call.name}({rendered})")
    return "\n".join(lines)


def run_trajectory(
    trajectory: Trajectory, executor: ToolExecutor
) -> list[tuple[ToolCall, str]]:
    """Execute every call of a trajectory and collect the tool responses."""
    return [(call, executor.execute(call.name, dict(call.args))) for call in trajectory]


def _ask_for_questions(
    client: LlmClient,
    prompt: str,
    n: int,
    temperature: float,
    retry_cap: int,
) -> list[str]:
    messages: list[dict] = [{"role": "user", "content": prompt}]
    found: list[str] = []
    for attempt in range(retry_cap + 1):
        reply = client.complete(messages, temperature=temperature)
        found = parse_numbered_list(reply)
        if len(found) >= n:
            if attempt:
                log.debug("question generation needed %d retr%s", attempt,
                          "y" if attempt == 1 else "ies")
            return found[:n]
        messages.append({"role": "assistant", "content": reply})
        messages.append(
            {"role": "user", "content": RETRY_NUDGE_TEMPLATE.format(n=n)}
        )
    raise GenerationError(
        f"expected {n} questions but parsed {len(found)} after {retry_cap} retries"
    )


def generate_questions(
    seed_question: str,
    seed_trajectory: Trajectory,
    target_trajectory: Trajectory,
    client: LlmClient,
    executor: ToolExecutor,
    *,
    n: int = 10,
    temperature: float = 0.7,
    retry_cap: int = 2,
) -> list[str]:
    """Investigator role: execute the target trajectory and write ``n``
    questions in the style of the worked (question, trajectory) example."""
    target_runs = run_trajectory(target_trajectory, executor)
    run_lines = "\n".join(
        f"- {call.name}({', '.join(f'{k}={v}' for k, v in call.args)}) -> {result}"
        for call, result in target_runs
    ) or "(no tool calls)"
    prompt = INVESTIGATOR_PROMPT_TEMPLATE.format(
        seed_question=seed_question,
        seed_trajectory=format_trajectory_readable(seed_trajectory),
        target_runs=run_lines,
        n=n,
    )
    return _ask_for_questions(client, prompt, n, temperature, retry_cap)


def generate_alternate_questions(
    response: str,
    client: LlmClient,
    *,
    n: int = 3,
    temperature: float = 0.0,
    retry_cap: int = 2,
) -> list[str]:
    """Reverse-engineer role: questions that cover the response's main points."""
    if not response or not response.strip():
        raise ValidationError("cannot reverse-engineer questions from an empty response")
    prompt = REVERSE_PROMPT_TEMPLATE.format(response=response, n=n)
    return _ask_for_questions(client, prompt, n, temperature, retry_cap)


def build_verification_case(
    record: QuestionRecord,
    client: LlmClient,
    executor: ToolExecutor,
    *,
    n_alternates: int = 3,
    min_alternates: int | None = None,
    step_cap: int = 10,
    retry_cap: int = 2,
    reverse_temperature: float = 0.0,
    assistant_temperature: float = 0.0,
) -> VerificationCase:
    """Assemble a verification case for one annotated record.

    Alternate questions come from the record's response; each is answered
    through the tool loop, retrying failed runs up to ``retry_cap`` times.
    The case fails unless at least ``min_alternates`` (default: all) runs
    succeed.
    """
    if record.response is None or not record.response.strip():
        raise ValidationError(f"record {record.id!r} has no response to reverse-engineer")
    minimum = n_alternates if min_alternates is None else min_alternates
    alternate_questions = generate_alternate_questions(
        record.response,
        client,
        n=n_alternates,
        temperature=reverse_temperature,
        retry_cap=retry_cap,
    )
    kept_questions: list[str] = []
    kept_trajectories: list[Trajectory] = []
    failures: list[tuple[int, Exception]] = []
    for index, question in enumerate(alternate_questions):
        last_error: Exception | None = None
        for _ in range(retry_cap + 1):
            try:
                run = answer_question(
                    question,
                    client,
                    executor,
                    step_cap=step_cap,
                    temperature=assistant_temperature,
                )
                kept_questions.append(question)
                kept_trajectories.append(run.trajectory)
                last_error = None
                break
            except (StepCapError, ToolResolutionError, TransportError) as exc:
                last_error = exc
        if last_error is not None:
            failures.append((index, last_error))
    if len(kept_questions) < minimum:
        index, error = failures[0]
        raise CaseAssemblyError(
            f"alternate question {index} failed after {retry_cap} retries: {error}"
        )
    return VerificationCase(
        question=record.question,
        trajectory=record.trajectory,
        response=record.response,
        alternate_questions=kept_questions,
        alternate_trajectories=kept_trajectories,
    )


# --- judge baseline -------------------------------------------------------------


LABEL_DESCRIPTIONS = {
    0: (
        "0: Incorrect - the trajectory makes incorrect calls or makes "
        "assumptions beyond what the question requires."
    ),
    1: (
        "1: Correct - every step makes sense and the trajectory accounts "
        "for all of the user's requirements."
    ),
}

JUDGE_PROMPT_TEMPLATE = """Decide whether the assistant's tool-call trajectory correctly answers the question.

Scoring rubric:
{rubric}

Examples:

Question: {example_1_question}
Trajectory:
{example_1_trajectory}
Score: {example_1_label}

Question: {example_2_question}
Trajectory:
{example_2_trajectory}
Score: {example_2_label}

Now evaluate this pair.

Question: {question}
Trajectory:
{trajectory}

Explain your reasoning first. Then end your reply with one line of the form
"Final score: 0" or "Final score: 1"."""

JUDGE_REASK = 'Your reply must end with "Final score: 0" or "Final score: 1".'

_SCORE_RE = re.compile(r"final\s*score\s*[:=]?\s*([01])\b", re.IGNORECASE)


@dataclass(frozen=True)
class JudgeOptions:
    system_prompt_on: bool = True
    system_prompt: str = DEFAULT_JUDGE_SYSTEM_PROMPT
    label_order: str = "zero_first"
    temperature: float = 0.0
    retry_cap: int = 2

    def __post_init__(self):
        if self.label_order not in ("zero_first", "one_first"):
            raise ValidationError(f"unknown label_order {self.label_order!r}")


def _check_exemplars(exemplars: Sequence[QuestionRecord]) -> tuple[QuestionRecord, QuestionRecord]:
    if len(exemplars) != 2:
        raise ValidationError("judge needs exactly two exemplars")
    labels = sorted(e.label for e in exemplars)
    if labels != [0, 1]:
        raise ValidationError("judge exemplars must be one correct and one incorrect pair")
    return exemplars[0], exemplars[1]


def build_judge_prompt(
    record: QuestionRecord,
    exemplars: Sequence[QuestionRecord],
    options: JudgeOptions = JudgeOptions(),
) -> tuple[str | None, list[dict]]:
    """Assemble the judge request; pure so prompt structure is testable."""
    first, second = _check_exemplars(exemplars)
    if options.label_order == "zero_first":
        rubric = f"{LABEL_DESCRIPTIONS[0]}\n{LABEL_DESCRIPTIONS[1]}"
    else:
        rubric = f"{LABEL_DESCRIPTIONS[1]}\n{LABEL_DESCRIPTIONS[0]}"
    prompt = JUDGE_PROMPT_TEMPLATE.format(
        rubric=rubric,
        example_1_question=first.question,
        example_1_trajectory=format_trajectory_readable(first.trajectory),
        example_1_label=first.label,
        example_2_question=second.question,
        example_2_trajectory=format_trajectory_readable(second.trajectory),
        example_2_label=second.label,
        question=record.question,
        trajectory=format_trajectory_readable(record.trajectory),
    )
    system = options.system_prompt if options.system_prompt_on else None
    return system, [{"role": "user", "content": prompt}]


def judge_trajectory(
    record: QuestionRecord,
    client: LlmClient,
    exemplars: Sequence[QuestionRecord],
    options: JudgeOptions = JudgeOptions(),
) -> tuple[int, str]:
    """Score one (question, trajectory) pair with the LLM judge.

    The model is asked for a rationale followed by a final 0/1 score line
    and re-asked up to ``retry_cap`` times when the score line is missing.
    """
    system, messages = build_judge_prompt(record, exemplars, options)
    reply = ""
    for _ in range(options.retry_cap + 1):
        reply = client.complete(
            messages, system_prompt=system, temperature=options.temperature
        )
        matches = list(_SCORE_RE.finditer(reply))
        if matches:
            final = matches[-1]
            rationale = reply[: final.start()].strip()
            return int(final.group(1)), rationale
        messages = list(messages)
        messages.append({"role": "assistant", "content": reply})
        messages.append({"role": "user", "content": JUDGE_REASK})
    raise JudgeParseError(
        f"no final score line after {options.retry_cap} re-asks", raw=reply
    )
