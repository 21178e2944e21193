"""Chat-completion backends: a remote OpenAI-compatible client and a
deterministic gold-replay mock.

The six dialogue roles are folded onto the three-role wire format by
serializing domain/function records as assistant content and observation
records as user content, each prefixed with an explicit <|role|> tag. The
exporter keeps true six-role structure; this folding is only for backends
that speak the standard chat API, and fine-tuned models see the same
encoding at training time via the trainer's linearization.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import requests

from .prompts import ChatPayload

WIRE_ROLES = {"system": "system", "user": "user", "assistant": "assistant"}
FOLDED_TO_ASSISTANT = ("domain", "function")
FOLDED_TO_USER = ("observation",)

RETRYABLE_STATUS_MIN = 500


class BackendError(RuntimeError):
    """Backend failure that is not worth retrying (or retries exhausted)."""


class FixtureMissError(BackendError):
    """The mock has no recorded completion for the requested tag."""


class JudgeParseError(ValueError):
    """The judge completion carried no usable score."""


@dataclass(frozen=True)
class GenerationRequest:
    payload: ChatPayload
    max_new_tokens: int = 256
    temperature: float = 0.0
    stop: tuple[str, ...] = ()
    timeout: float = 30.0
    tag: str = ""

    def __post_init__(self) -> None:
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0
    attempts: int = 1


class Backend(Protocol):
    def generate(self, request: GenerationRequest) -> GenerationResult: ...


def fold_messages(payload: ChatPayload) -> list[dict]:
    """Map six-role messages onto the system/user/assistant wire roles."""
    wire = []
    for message in payload.messages:
        if message.role in WIRE_ROLES:
            wire.append({"role": WIRE_ROLES[message.role], "content": message.content})
        elif message.role in FOLDED_TO_ASSISTANT:
            wire.append(
                {"role": "assistant", "content": f"<|{message.role}|>\n{message.content}"}
            )
        elif message.role in FOLDED_TO_USER:
            wire.append(
                {"role": "user", "content": f"<|{message.role}|>\n{message.content}"}
            )
        else:
            raise ValueError(f"cannot fold role {message.role!r}")
    return wire


class MockBackend:
    """Replays recorded completions keyed by the request's idempotency tag.

    Bit-deterministic: identical inputs yield identical outputs, so two full
    pipeline runs over the same corpus produce identical transcripts.
    """

    def __init__(self, fixtures: dict[str, str]):
        self.fixtures = dict(fixtures)
        self.calls: list[str] = []

    @classmethod
    def from_gold(cls, dialogues) -> "MockBackend":
        """Build replay fixtures from gold six-role dialogues.

        Tags follow the orchestrator's convention "<dialogue id>:<turn>:<task>"
        with 1-based turn indices.
        """
        fixtures: dict[str, str] = {}
        for dialogue in dialogues:
            for index, turn in enumerate(dialogue.gold, start=1):
                fixtures[f"{dialogue.id}:{index}:DS"] = turn.domain
                fixtures[f"{dialogue.id}:{index}:DST"] = turn.call.canonical_json()
                fixtures[f"{dialogue.id}:{index}:RG"] = turn.frame.render()
        return cls(fixtures)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        self.calls.append(request.tag)
        if request.tag not in self.fixtures:
            raise FixtureMissError(f"no fixture recorded for tag {request.tag!r}")
        text = self.fixtures[request.tag]
        return GenerationResult(text=text, completion_tokens=len(text) // 4)


class HttpBackend:
    """OpenAI-compatible chat-completions client with bounded retries.

    Retries (with exponential backoff) apply only to transport errors and
    5xx responses; any 4xx is returned to the caller immediately. Total
    attempts never exceed max_attempts. When trace_path is set, every
    request/response pair is appended to a JSONL file for replay.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str = "",
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        trace_path: Optional[str | Path] = None,
        session: Optional[requests.Session] = None,
        max_concurrency: int = 8,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.trace_path = Path(trace_path) if trace_path else None
        self.session = session or requests.Session()
        self._semaphore = threading.BoundedSemaphore(max_concurrency)
        self._trace_lock = threading.Lock()

    @property
    def url(self) -> str:
        return f"{self.endpoint}/v1/chat/completions"

    def _trace(self, record: dict) -> None:
        if self.trace_path is None:
            return
        with self._trace_lock:
            self.trace_path.parent.mkdir(parents=True, exist_ok=True)
            with self.trace_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record) + "\n")

    def generate(self, request: GenerationRequest) -> GenerationResult:
        body = {
            "model": self.model,
            "messages": fold_messages(request.payload),
            "max_tokens": request.max_new_tokens,
            "temperature": request.temperature,
        }
        if request.stop:
            body["stop"] = list(request.stop)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        start = time.monotonic()
        last_error: Optional[str] = None
        with self._semaphore:
            for attempt in range(1, self.max_attempts + 1):
                try:
                    response = self.session.post(
                        self.url, json=body, headers=headers, timeout=request.timeout
                    )
                except requests.RequestException as exc:
                    last_error = f"transport error: {exc}"
                else:
                    if response.status_code < 400:
                        try:
                            parsed = response.json()
                            text = parsed["choices"][0]["message"]["content"]
                        except (ValueError, KeyError, IndexError, TypeError) as exc:
                            raise BackendError(f"malformed response body: {exc}") from exc
                        usage = parsed.get("usage") or {}
                        latency = time.monotonic() - start
                        result = GenerationResult(
                            text=text,
                            prompt_tokens=int(usage.get("prompt_tokens", 0)),
                            completion_tokens=int(usage.get("completion_tokens", 0)),
                            latency=latency,
                            attempts=attempt,
                        )
                        self._trace(
                            {
                                "tag": request.tag,
                                "request": body,
                                "response_text": text,
                                "attempts": attempt,
                                "latency_s": latency,
                            }
                        )
                        return result
                    if response.status_code < RETRYABLE_STATUS_MIN:
                        raise BackendError(
                            f"HTTP {response.status_code}: {response.text[:500]}"
                        )
                    last_error = f"HTTP {response.status_code}"
                if attempt < self.max_attempts:
                    time.sleep(self.backoff_base * (2 ** (attempt - 1)))
        raise BackendError(
            f"giving up after {self.max_attempts} attempts: {last_error}"
        )


def parse_judge_score(text: str) -> float:
    """Extract a 0-5 score from a judge completion; never fabricates one."""
    m = re.search(r"score\s*[:=]\s*(-?\d+(?:\.\d+)?)", text, re.IGNORECASE)
    if m is None:
        m = re.search(r"(?<![\w.])(-?\d+(?:\.\d+)?)(?![\w.])", text)
    if m is None:
        raise JudgeParseError(f"no numeric score in judge completion: {text[:200]!r}")
    score = float(m.group(1))
    if not (0.0 <= score <= 5.0):
        raise JudgeParseError(f"judge score {score} outside [0, 5]")
    return score


JUDGE_SYSTEM = (
    "You are a strict evaluator of task-oriented dialogue responses. "
    "Rate the response on the given criterion with an integer or decimal "
    "between 0 and 5. Answer in exactly the form 'Score: <number>'."
)


def judge(
    backend: Backend,
    rubric: str,
    exchange: str,
    timeout: float = 30.0,
    tag: str = "",
) -> float:
    """Score one exchange against one rubric criterion via the backend."""
    from .core import TurnRecord

    payload = ChatPayload(
        (
            TurnRecord("system", JUDGE_SYSTEM),
            TurnRecord("user", f"Criterion: {rubric}\n\n{exchange}"),
        )
    )
    request = GenerationRequest(payload=payload, max_new_tokens=16, timeout=timeout, tag=tag)
    result = backend.generate(request)
    return parse_judge_score(result.text)
