"""Uniform chat-completion interface: OpenAI-compatible HTTP backend plus a
deterministic scripted backend for tests, with token accounting."""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import httpx

from .model import ModelTag

MAX_TOP_K = 20


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


class ProtocolError(GatewayError):
    pass


class ConfigurationError(GatewayError):
    pass


@dataclass(frozen=True)
class SectionSpan:
    tag: str
    start: int
    end: int


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str
    section_tags: tuple[SectionSpan, ...] = ()

    def __post_init__(self) -> None:
        spans = sorted(self.section_tags, key=lambda s: s.start)
        prev_end = 0
        for s in spans:
            if s.start < prev_end or s.end > len(self.content) or s.start > s.end:
                raise ValueError(f"section span {s.tag!r} overlaps or exceeds content")
            prev_end = s.end

    def to_json(self) -> dict:
        d: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.section_tags:
            d["section_tags"] = [
                {"tag": s.tag, "start": s.start, "end": s.end} for s in self.section_tags
            ]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ChatMessage":
        return cls(
            role=d["role"],
            content=d["content"],
            section_tags=tuple(
                SectionSpan(s["tag"], s["start"], s["end"])
                for s in d.get("section_tags", [])
            ),
        )


@dataclass(frozen=True)
class TokenInfo:
    token_text: str
    logprob: float
    top_k: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class Usage:
    input_tokens: int
    output_tokens: int
    source: str = "backend"  # backend | approximate-tokenizer


@dataclass(frozen=True)
class Completion:
    text: str
    finish_reason: str
    usage: Usage
    tokens: tuple[TokenInfo, ...] = ()


@dataclass(frozen=True)
class CompletionParams:
    temperature: float = 0.0
    max_tokens: int = 1024
    top_k_logprobs: int = 0
    stop: tuple[str, ...] = ()
    seed: Optional[int] = None


# -- tokenizer ----------------------------------------------------------------

_TOKEN_SPLIT = re.compile(r"\w+|[^\w\s]")


def approx_count_tokens(text: str) -> int:
    """Whitespace+punctuation approximation; clearly labeled approximate."""
    return len(_TOKEN_SPLIT.findall(text))


def count_tokens(model: ModelTag, text: str) -> int:
    # Pluggable per model tag; the default is the approximate tokenizer.
    return approx_count_tokens(text)


def count_message_tokens(model: ModelTag, messages: list[ChatMessage]) -> int:
    return sum(count_tokens(model, m.content) for m in messages)


# -- scripted backend ---------------------------------------------------------


@dataclass(frozen=True)
class ScriptedRule:
    # one substring, or a tuple of substrings that must all be present in the
    # concatenated prompt
    trigger: str | tuple[str, ...]
    response: str
    finish_reason: str = "stop"
    synthetic_logprobs: tuple[tuple[str, float], ...] = ()

    def matches(self, prompt_text: str) -> bool:
        needles = (self.trigger,) if isinstance(self.trigger, str) else self.trigger
        return all(n in prompt_text for n in needles)


@dataclass
class ScriptedBehavior:
    rules: list[ScriptedRule] = field(default_factory=list)
    default_response: Optional[str] = None

    def match(self, prompt_text: str) -> Optional[ScriptedRule]:
        for rule in self.rules:  # first matching rule wins
            if rule.matches(prompt_text):
                return rule
        return None

    def to_json(self) -> dict:
        return {
            "rules": [
                {"trigger": list(r.trigger) if isinstance(r.trigger, tuple) else r.trigger,
                 "response": r.response,
                 "finish_reason": r.finish_reason}
                for r in self.rules
            ],
            "default_response": self.default_response,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ScriptedBehavior":
        rules = []
        for r in d.get("rules", []):
            trigger = r["trigger"]
            if isinstance(trigger, list):
                trigger = tuple(trigger)
            rules.append(ScriptedRule(trigger, r["response"], r.get("finish_reason", "stop")))
        return cls(rules=rules, default_response=d.get("default_response"))

    @classmethod
    def load(cls, path: str | Path) -> "ScriptedBehavior":
        return cls.from_json(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))


# -- usage ledger -------------------------------------------------------------


class UsageLedger:
    """Per-trajectory and per-run input/output token totals, by source."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._per_trajectory: dict[str, dict[str, int]] = {}
        self._per_source: dict[str, dict[str, int]] = {}

    def add(self, trajectory_id: str, usage: Usage) -> dict[str, int]:
        with self._lock:
            t = self._per_trajectory.setdefault(
                trajectory_id, {"input_tokens": 0, "output_tokens": 0}
            )
            t["input_tokens"] += usage.input_tokens
            t["output_tokens"] += usage.output_tokens
            s = self._per_source.setdefault(
                usage.source, {"input_tokens": 0, "output_tokens": 0}
            )
            s["input_tokens"] += usage.input_tokens
            s["output_tokens"] += usage.output_tokens
            return dict(t)

    def trajectory_totals(self, trajectory_id: str) -> dict[str, int]:
        with self._lock:
            return dict(
                self._per_trajectory.get(
                    trajectory_id, {"input_tokens": 0, "output_tokens": 0}
                )
            )

    def run_totals(self) -> dict[str, int]:
        with self._lock:
            out = {"input_tokens": 0, "output_tokens": 0}
            for t in self._per_trajectory.values():
                out["input_tokens"] += t["input_tokens"]
                out["output_tokens"] += t["output_tokens"]
            return out

    def totals_by_source(self) -> dict[str, dict[str, int]]:
        with self._lock:
            return {k: dict(v) for k, v in self._per_source.items()}


# -- gateway ------------------------------------------------------------------


def _apply_stop(text: str, stop: tuple[str, ...]) -> tuple[str, str]:
    cut = len(text)
    hit = False
    for s in stop:
        i = text.find(s)
        if i != -1 and i < cut:
            cut = i
            hit = True
    return text[:cut], ("stop" if hit else "stop")


class Gateway:
    """Shareable across concurrent trajectory workers."""

    def __init__(
        self,
        scripted: Optional[dict[str, ScriptedBehavior]] = None,
        ledger: Optional[UsageLedger] = None,
        http_client: Optional[httpx.Client] = None,
        max_retries: int = 2,
    ):
        self.scripted = scripted or {}
        self.ledger = ledger or UsageLedger()
        self._client = http_client
        self.max_retries = max_retries

    def register_scripted(self, tag_name: str, behavior: ScriptedBehavior) -> None:
        self.scripted[tag_name] = behavior

    def complete(
        self,
        model: ModelTag,
        messages: list[ChatMessage],
        params: CompletionParams = CompletionParams(),
    ) -> Completion:
        if not messages:
            raise ValueError("messages must be non-empty")
        if params.top_k_logprobs > MAX_TOP_K:
            raise ValueError(f"top_k_logprobs capped at {MAX_TOP_K}")
        if model.backend_kind == "scripted":
            return self._complete_scripted(model, messages, params)
        return self._complete_http(model, messages, params)

    def _complete_scripted(
        self, model: ModelTag, messages: list[ChatMessage], params: CompletionParams
    ) -> Completion:
        behavior = self.scripted.get(model.name)
        if behavior is None:
            raise ConfigurationError(f"no scripted behavior registered for {model.name!r}")
        prompt_text = "\n".join(m.content for m in messages)
        rule = behavior.match(prompt_text)
        if rule is None:
            if behavior.default_response is None:
                raise ConfigurationError(
                    f"scripted backend {model.name!r}: no rule matched and no default"
                )
            text, finish = behavior.default_response, "stop"
            logprobs: tuple[tuple[str, float], ...] = ()
        else:
            text, finish = rule.response, rule.finish_reason
            logprobs = rule.synthetic_logprobs
        text, finish = _apply_stop(text, params.stop)
        usage = Usage(
            input_tokens=count_message_tokens(model, messages),
            output_tokens=count_tokens(model, text),
            source="approximate-tokenizer",
        )
        tokens = tuple(TokenInfo(t, lp) for t, lp in logprobs)
        return Completion(text=text, finish_reason=finish, usage=usage, tokens=tokens)

    def _complete_http(
        self, model: ModelTag, messages: list[ChatMessage], params: CompletionParams
    ) -> Completion:
        client = self._client or httpx.Client(timeout=120)
        body: dict[str, Any] = {
            "model": model.name,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.stop:
            body["stop"] = list(params.stop)
        if params.seed is not None:
            body["seed"] = params.seed
        if params.top_k_logprobs:
            body["logprobs"] = True
            body["top_logprobs"] = params.top_k_logprobs
        last_error: Optional[Exception] = None
        for attempt in range(1, self.max_retries + 2):
            try:
                resp = client.post(
                    model.endpoint_or_script.rstrip("/") + "/v1/chat/completions",
                    json=body,
                )
                resp.raise_for_status()
                return self._parse_http(model, messages, resp.json())
            except (httpx.TransportError, httpx.HTTPStatusError) as e:
                last_error = e
        raise TransportError(str(last_error), attempts=self.max_retries + 1)

    def _parse_http(
        self, model: ModelTag, messages: list[ChatMessage], payload: dict
    ) -> Completion:
        try:
            choice = payload["choices"][0]
            text = choice["message"]["content"]
            finish = choice.get("finish_reason", "stop")
        except (KeyError, IndexError, TypeError) as e:
            raise ProtocolError(f"malformed chat-completions payload: {e}")
        tokens: list[TokenInfo] = []
        logprob_content = (choice.get("logprobs") or {}).get("content") or []
        for item in logprob_content:
            top = tuple(
                sorted(
                    ((t["token"], t["logprob"]) for t in item.get("top_logprobs", [])),
                    key=lambda p: -p[1],
                )
            )
            tokens.append(TokenInfo(item["token"], item["logprob"], top))
        usage_d = payload.get("usage")
        if usage_d:
            usage = Usage(
                input_tokens=usage_d.get("prompt_tokens", 0),
                output_tokens=usage_d.get("completion_tokens", 0),
                source="backend",
            )
        else:
            usage = Usage(
                input_tokens=count_message_tokens(model, messages),
                output_tokens=count_tokens(model, text),
                source="approximate-tokenizer",
            )
        return Completion(text=text, finish_reason=finish, usage=usage,
                          tokens=tuple(tokens))
