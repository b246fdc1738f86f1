"""Offline fixtures: canned tools and a rule-based stand-in for the LLM.

These make every pipeline stage runnable without network access. The demo
client is not a language model; it pattern-matches the request far enough to
play each agent role with deterministic, hash-derived content, which also
makes it a convenient source for recording mock scripts.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Mapping, Sequence

from .errors import ToolResolutionError

_CITIES = ("Boston", "Berlin", "Tokyo", "Austin", "Lagos")
_SERVICES = ("paymentservice", "checkout", "search-api", "billing", "auth-gateway")
_CONDITIONS = ("clear", "cloudy", "light rain", "windy", "snow flurries")
_CURRENCY_RATES = {
    ("USD", "EUR"): 0.92,
    ("EUR", "USD"): 1.09,
    ("USD", "GBP"): 0.78,
    ("GBP", "USD"): 1.28,
    ("USD", "JPY"): 150.0,
    ("JPY", "USD"): 0.0067,
}


def _digest(*parts: str) -> int:
    joined = "\x1f".join(parts)
    return int.from_bytes(hashlib.sha256(joined.encode("utf-8")).digest()[:8], "big")


def _pick(options: Sequence[str], *parts: str) -> str:
    return options[_digest(*parts) % len(options)]


class FixtureToolExecutor:
    """Deterministic canned tools (weather, currency, service metrics)."""

    def __init__(self):
        self._tools = {
            "get_current_weather": self._weather,
            "convert_currency": self._currency,
            "get_service_metrics": self._metrics,
            "list_recent_errors": self._errors,
        }

    def describe(self) -> str:
        return "\n".join(
            [
                "- get_current_weather(city): current weather for a city",
                "- convert_currency(amount, from_currency, to_currency): convert an amount",
                "- get_service_metrics(service, time_range): error rate and latency for a service",
                "- list_recent_errors(service): most common recent errors for a service",
            ]
        )

    def execute(self, name: str, args: Mapping[str, str]) -> str:
        tool = self._tools.get(name)
        if tool is None:
            raise ToolResolutionError(f"unknown tool {name!r}")
        return tool({k: str(v) for k, v in args.items()})

    def _weather(self, args: Mapping[str, str]) -> str:
        city = args.get("city", "Boston")
        temp = 40 + _digest("weather", city) % 55
        condition = _pick(_CONDITIONS, "condition", city)
        return f"Weather in {city}: {temp}F, {condition}."

    def _currency(self, args: Mapping[str, str]) -> str:
        source = args.get("from_currency", "USD").upper()
        target = args.get("to_currency", "EUR").upper()
        raw_amount = args.get("amount", "1")
        try:
            amount = float(raw_amount)
        except ValueError:
            return f"Cannot parse amount {raw_amount!r}."
        rate = _CURRENCY_RATES.get((source, target), 1.0)
        return f"{raw_amount} {source} = {round(amount * rate, 2)} {target} (rate {rate})."

    def _metrics(self, args: Mapping[str, str]) -> str:
        service = args.get("service", "paymentservice")
        window = args.get("time_range", "last hour")
        error_rate = (_digest("err", service, window) % 500) / 100.0
        latency = 40 + _digest("lat", service, window) % 400
        return (
            f"Service {service} over {window}: error_rate={error_rate}%, "
            f"latency_p50={latency}ms."
        )

    def _errors(self, args: Mapping[str, str]) -> str:
        service = args.get("service", "paymentservice")
        pool = ("TimeoutError", "ConnectionReset", "QuotaExceeded", "SchemaMismatch")
        first = _pick(pool, "e1", service)
        second = _pick(tuple(e for e in pool if e != first), "e2", service)
        return f"Most common errors for {service}: {first}, {second}."


_QUESTION_FORMS = (
    "What is the current error rate for the {service} service?",
    "How is the weather in {city} right now?",
    "Convert 120 USD to EUR for the {service} invoice.",
    "Which errors hit the {service} service most recently?",
    "What is the p50 latency for {service} over the last hour?",
)


class DemoLlmClient:
    """Rule-based offline stand-in satisfying the LlmClient contract.

    Routes on the request shape: question-list prompts get a numbered list,
    assistant-loop prompts get tool-call/answer JSON driven by keywords in
    the question, judge prompts get a rationale plus score line. Every reply
    is a pure function of the request and the configured seed.
    """

    def __init__(self, seed: int = 0):
        self.seed = str(seed)

    def complete(self, messages, *, system_prompt=None, temperature=0.0) -> str:
        system = system_prompt or ""
        last = messages[-1]["content"] if messages else ""
        if "To call a tool" in system:
            return self._assistant_turn(messages)
        if "numbered list" in last:
            return self._question_list(last)
        if "Final score" in last:
            return self._judge_verdict(last)
        return json.dumps({"answer": "I do not know."})

    # -- investigator / reverse engineer ------------------------------------

    def _question_list(self, prompt: str) -> str:
        match = re.search(r"numbered list \((\d+) lines", prompt)
        if match is None:
            match = re.search(r"exactly (\d+) questions", prompt)
        count = int(match.group(1)) if match else 3
        lines = []
        for i in range(count):
            form = _pick(_QUESTION_FORMS, self.seed, "form", prompt, str(i))
            question = form.format(
                service=_pick(_SERVICES, self.seed, "svc", prompt, str(i)),
                city=_pick(_CITIES, self.seed, "city", prompt, str(i)),
            )
            lines.append(f"{i + 1}. {question}")
        return "\n".join(lines)

    # -- assistant tool loop --------------------------------------------------

    def _assistant_turn(self, messages) -> str:
        question = next(
            (m["content"] for m in messages if m["role"] == "user"), ""
        )
        tool_results = [m["content"] for m in messages if m["role"] == "tool"]
        wanted_calls = 1 + _digest(self.seed, "depth", question) % 2
        if len(tool_results) >= wanted_calls:
            summary = tool_results[-1].rstrip(".")
            return json.dumps({"answer": f"{summary}. That answers the question."})
        return json.dumps(self._choose_call(question, len(tool_results)))

    def _choose_call(self, question: str, step: int) -> dict:
        lowered = question.lower()
        city = next((c for c in _CITIES if c.lower() in lowered), None)
        service = next((s for s in _SERVICES if s in lowered), None)
        if "weather" in lowered:
            return {
                "tool": "get_current_weather",
                "args": {"city": city or _pick(_CITIES, self.seed, "c", question)},
            }
        if "convert" in lowered or "usd" in lowered or "currency" in lowered:
            return {
                "tool": "convert_currency",
                "args": {"amount": "120", "from_currency": "USD", "to_currency": "EUR"},
            }
        svc = service or _pick(_SERVICES, self.seed, "s", question)
        if "error" in lowered and step == 0:
            return {"tool": "list_recent_errors", "args": {"service": svc}}
        return {
            "tool": "get_service_metrics",
            "args": {"service": svc, "time_range": "last hour"},
        }

    # -- judge ---------------------------------------------------------------

    def _judge_verdict(self, prompt: str) -> str:
        score = _digest(self.seed, "judge", prompt) % 2
        return (
            "The trajectory was compared against the question requirements "
            f"step by step.\nFinal score: {score}"
        )
