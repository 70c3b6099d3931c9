"""
LLM Gateway Module

Chat request types, the token/latency ledger, tolerant JSON extraction and
the re-prompting ``complete_json`` loop shared by every agent.
"""

import json
import logging
import math
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Optional, Protocol, Union

from ..errors import LedgerError, LLMError, MalformedOutput

logger = logging.getLogger(__name__)

REPROMPT_SUFFIX = (
    "\n\nYour previous reply could not be used. Return only JSON, "
    "with no prose and no code fences."
)
DEFAULT_REPROMPT_BUDGET = 2


class CallTag(str, Enum):
    """Call sites; every request and ledger entry carries one."""
    PLAN = "plan"
    REPLAN = "replan"
    MATCH = "match"
    DISTILL = "distill"
    SEARCHER = "searcher"
    RETRIEVER_PREFS = "retriever_prefs"
    INTERPRETER = "interpreter"
    INTERACTOR = "interactor"
    SIMULATOR = "simulator"
    QUERY_GEN = "query_gen"


DEFAULT_TEMPERATURES = {tag: 0.0 for tag in CallTag}
DEFAULT_TEMPERATURES[CallTag.QUERY_GEN] = 0.7


def _as_tag(tag: Union[str, CallTag]) -> CallTag:
    try:
        return CallTag(tag)
    except ValueError:
        raise LedgerError(f"unknown call tag '{tag}'") from None


@dataclass(frozen=True)
class ChatRequest:
    """
    One chat-completion request.

    ``temperature`` defaults per tag; ``attempt`` counts re-prompts of the
    same logical request (scripted fixtures can key on it).
    """
    system_prompt: str
    user_prompt: str
    tag: CallTag
    temperature: Optional[float] = None
    max_tokens: int = 1024
    attempt: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tag", _as_tag(self.tag))
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise LLMError(f"empty prompt for tag '{self.tag.value}'")
        if self.temperature is None:
            object.__setattr__(self, "temperature", DEFAULT_TEMPERATURES[self.tag])
        if not 0.0 <= self.temperature <= 1.0:
            raise LLMError(f"temperature must be in [0, 1], got {self.temperature}")
        if self.max_tokens <= 0:
            raise LLMError("max_tokens must be positive")

    def messages(self):
        return [
            {"role": "system", "content": self.system_prompt},
            {"role": "user", "content": self.user_prompt},
        ]


@dataclass
class Completion:
    """Provider reply; token counts are None when the backend reports none."""
    text: str
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None


class ChatProvider(Protocol):
    def complete(self, request: ChatRequest) -> Completion:
        ...


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


# =============================================================================
# Ledger
# =============================================================================

@dataclass
class TagCounters:
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0

    def to_dict(self, include_latency: bool = True) -> Dict[str, Any]:
        data = {
            "calls": self.calls,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }
        if include_latency:
            data["latency"] = round(self.latency, 6)
        return data


class TokenLedger:
    """
    Per-tag call, token and latency counters.

    Updates are serialized by a lock. A child ledger forwards every record to
    its parent, so per-query ledgers roll up into the run ledger.
    """

    def __init__(self, parent: Optional["TokenLedger"] = None):
        self._lock = threading.Lock()
        self._counters: Dict[CallTag, TagCounters] = {tag: TagCounters() for tag in CallTag}
        self.parent = parent

    def child(self) -> "TokenLedger":
        return TokenLedger(parent=self)

    def record(self, tag: Union[str, CallTag], prompt_tokens: int,
               completion_tokens: int, latency: float = 0.0) -> "TokenLedger":
        tag = _as_tag(tag)
        if prompt_tokens < 0 or completion_tokens < 0 or latency < 0:
            raise LedgerError("ledger counts must be non-negative")
        with self._lock:
            c = self._counters[tag]
            c.calls += 1
            c.prompt_tokens += int(prompt_tokens)
            c.completion_tokens += int(completion_tokens)
            c.latency += float(latency)
        if self.parent is not None:
            self.parent.record(tag, prompt_tokens, completion_tokens, latency)
        return self

    def get(self, tag: Union[str, CallTag]) -> TagCounters:
        tag = _as_tag(tag)
        with self._lock:
            c = self._counters[tag]
            return TagCounters(c.calls, c.prompt_tokens, c.completion_tokens, c.latency)

    def calls(self, tag: Union[str, CallTag]) -> int:
        return self.get(tag).calls

    def total(self) -> TagCounters:
        with self._lock:
            total = TagCounters()
            for c in self._counters.values():
                total.calls += c.calls
                total.prompt_tokens += c.prompt_tokens
                total.completion_tokens += c.completion_tokens
                total.latency += c.latency
            return total

    def to_dict(self, include_latency: bool = True) -> Dict[str, Any]:
        with self._lock:
            per_tag = {tag.value: c.to_dict(include_latency) for tag, c in self._counters.items()}
        return {"per_tag": per_tag, "total": self.total().to_dict(include_latency)}


def record(ledger: TokenLedger, tag: Union[str, CallTag], prompt_tokens: int,
           completion_tokens: int, latency: float = 0.0) -> TokenLedger:
    """Increment ``tag``'s counters once; returns the same ledger."""
    return ledger.record(tag, prompt_tokens, completion_tokens, latency)


# =============================================================================
# JSON extraction
# =============================================================================

_decoder = json.JSONDecoder()


def extract_json(text: str) -> Any:
    """
    Return the first decodable JSON object embedded in ``text``.

    Code fences and surrounding prose are skipped by trying every ``{``
    position in turn. Raises MalformedOutput when no object decodes.
    """
    if not isinstance(text, str):
        raise MalformedOutput("completion is not text", raw_text=repr(text))
    start = text.find("{")
    while start != -1:
        try:
            value, _ = _decoder.raw_decode(text, start)
            if isinstance(value, dict):
                return value
        except (ValueError, RecursionError):
            pass
        start = text.find("{", start + 1)
    raise MalformedOutput("no JSON object found in completion", raw_text=text)


def _call(provider: ChatProvider, request: ChatRequest,
          ledger: Optional[TokenLedger]) -> str:
    started = time.perf_counter()
    reply = provider.complete(request)
    latency = time.perf_counter() - started
    if isinstance(reply, str):
        reply = Completion(text=reply)
    if ledger is not None:
        prompt_tokens = reply.prompt_tokens
        if prompt_tokens is None:
            prompt_tokens = estimate_tokens(request.system_prompt + request.user_prompt)
        completion_tokens = reply.completion_tokens
        if completion_tokens is None:
            completion_tokens = estimate_tokens(reply.text)
        ledger.record(request.tag, prompt_tokens, completion_tokens, latency)
    return reply.text


def complete_json(
    request: ChatRequest,
    provider: ChatProvider,
    schema_check: Callable[[Any], bool],
    ledger: Optional[TokenLedger] = None,
    reprompt_budget: int = DEFAULT_REPROMPT_BUDGET,
) -> Any:
    """
    Request a JSON completion, re-prompting until it passes ``schema_check``.

    Parameters
    ----------
    request : ChatRequest
        First request; re-prompts append a "return only JSON" suffix
    provider : ChatProvider
        Backend
    schema_check : callable
        Predicate over the decoded value; exceptions count as rejection
    ledger : TokenLedger, optional
        Ledger charged for every call
    reprompt_budget : int
        Extra attempts after the first

    Returns
    -------
    Any
        Decoded value accepted by ``schema_check``
    """
    current = request
    raw = ""
    for attempt in range(reprompt_budget + 1):
        if attempt:
            logger.info("re-prompting %s for JSON (attempt %d)", request.tag.value, attempt + 1)
            current = replace(request, user_prompt=request.user_prompt + REPROMPT_SUFFIX,
                              attempt=attempt)
        raw = _call(provider, current, ledger)
        try:
            value = extract_json(raw)
        except MalformedOutput:
            continue
        try:
            accepted = bool(schema_check(value))
        except (KeyError, TypeError, ValueError, AttributeError):
            accepted = False
        if accepted:
            return value
    raise MalformedOutput(
        f"no acceptable JSON for '{request.tag.value}' after {reprompt_budget + 1} call(s)",
        raw_text=raw,
        attempts=reprompt_budget + 1,
    )


@dataclass
class LLMGateway:
    """Provider + ledger pair handed to every agent."""
    provider: ChatProvider
    ledger: TokenLedger = field(default_factory=TokenLedger)
    reprompt_budget: int = DEFAULT_REPROMPT_BUDGET

    def chat(self, request: ChatRequest) -> str:
        return _call(self.provider, request, self.ledger)

    def complete_json(self, request: ChatRequest, schema_check: Callable[[Any], bool]) -> Any:
        return complete_json(request, self.provider, schema_check, self.ledger,
                             self.reprompt_budget)

    def with_ledger(self, ledger: TokenLedger) -> "LLMGateway":
        return LLMGateway(self.provider, ledger, self.reprompt_budget)
