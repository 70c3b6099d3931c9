"""
Chat Providers

``HttpChatProvider`` speaks the chat-completions wire protocol;
``ScriptedProvider`` replays canned completions from a YAML fixture so that
whole runs are reproducible without network access.
"""

import json
import logging
import os
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Deque, Dict, List, Optional, Union

import requests
import yaml
from tenacity import (
    RetryError,
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from ..errors import ProviderError
from .gateway import CallTag, ChatRequest, Completion

logger = logging.getLogger(__name__)

MAX_LOGGED_REQUESTS = 1000


class _Retryable(Exception):
    """Transport failure worth retrying (connection error, 429, 5xx)."""


class HttpChatProvider:
    """
    POST ``<base_url>/v1/chat/completions`` with bearer authentication.

    Parameters
    ----------
    base_url : str
        Server root, without the ``/v1`` suffix
    model : str
        Model name sent in the body
    api_key_env : str
        Environment variable holding the key
    timeout : float
        Seconds per request
    retries : int
        Transport attempts (exponential backoff between them)
    """

    def __init__(self, base_url: str, model: str, api_key_env: str = "TAIRA_API_KEY",
                 timeout: float = 60.0, retries: int = 3,
                 session: Optional[requests.Session] = None):
        self.url = base_url.rstrip("/") + "/v1/chat/completions"
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.retries = max(1, retries)
        self.session = session or requests.Session()

    def _api_key(self) -> str:
        key = os.getenv(self.api_key_env, "").strip()
        if not key:
            raise ProviderError(f"{self.api_key_env} environment variable not set")
        return key

    def _post(self, payload: Dict[str, Any], headers: Dict[str, str]) -> Dict[str, Any]:
        try:
            response = self.session.post(self.url, json=payload, headers=headers,
                                         timeout=self.timeout)
        except requests.RequestException as exc:
            logger.warning("chat request failed: %s", exc)
            raise _Retryable(str(exc)) from exc
        if response.status_code == 429 or response.status_code >= 500:
            logger.warning("chat request returned HTTP %d", response.status_code)
            raise _Retryable(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise ProviderError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()
        except ValueError as exc:
            raise ProviderError("response body is not JSON") from exc

    def complete(self, request: ChatRequest) -> Completion:
        headers = {
            "Authorization": f"Bearer {self._api_key()}",
            "Content-Type": "application/json",
        }
        payload = {
            "model": self.model,
            "messages": request.messages(),
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        retrying = Retrying(
            stop=stop_after_attempt(self.retries),
            wait=wait_exponential(multiplier=0.5, min=0.5, max=8),
            retry=retry_if_exception_type(_Retryable),
            reraise=False,
        )
        try:
            data = retrying(self._post, payload, headers)
        except RetryError as exc:
            raise ProviderError(
                f"chat completion failed after {self.retries} attempt(s): "
                f"{exc.last_attempt.exception()}"
            ) from None

        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            raise ProviderError("response has no choices[0].message.content") from None
        usage = data.get("usage") or {}
        return Completion(
            text=text,
            prompt_tokens=usage.get("prompt_tokens"),
            completion_tokens=usage.get("completion_tokens"),
        )


# =============================================================================
# Scripted provider
# =============================================================================

def _render_reply(reply: Any) -> str:
    if isinstance(reply, str):
        return reply
    return json.dumps(reply, ensure_ascii=False)


@dataclass
class ScriptRule:
    """
    One fixture rule.

    Matches when the tag agrees, every ``contains`` string occurs in the
    system or user prompt, and (when set) ``call`` equals the request's
    re-prompt attempt. ``replies`` is indexed by attempt, clamped to its end.
    """
    tag: Optional[CallTag]
    contains: List[str] = field(default_factory=list)
    call: Optional[int] = None
    replies: List[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], index: int) -> "ScriptRule":
        if "reply" in data and "replies" in data:
            raise ProviderError(f"rule {index}: use either 'reply' or 'replies'")
        if "reply" in data:
            replies = [_render_reply(data["reply"])]
        elif "replies" in data and data["replies"]:
            replies = [_render_reply(r) for r in data["replies"]]
        else:
            raise ProviderError(f"rule {index}: no reply")
        contains = data.get("contains") or []
        if isinstance(contains, str):
            contains = [contains]
        tag = data.get("tag")
        try:
            tag = CallTag(tag) if tag else None
        except ValueError:
            raise ProviderError(f"rule {index}: unknown tag '{tag}'") from None
        return cls(tag=tag, contains=[str(c) for c in contains],
                   call=data.get("call"), replies=replies)

    def matches(self, request: ChatRequest) -> bool:
        if self.tag is not None and self.tag != request.tag:
            return False
        if self.call is not None and self.call != request.attempt:
            return False
        haystack = request.system_prompt + "\n" + request.user_prompt
        return all(c in haystack for c in self.contains)

    def reply_for(self, request: ChatRequest) -> str:
        return self.replies[min(request.attempt, len(self.replies) - 1)]


class ScriptedProvider:
    """
    Deterministic provider driven by ordered rules; first match wins.

    Fixture layout (YAML)::

        rules:
          - tag: match
            contains: "gathering with friends"
            reply: {"selected": "template_4"}
          - tag: plan
            replies: ["not json", {"user_input": "..."}]

    The most recent ``max_logged`` requests are kept in ``requests`` for
    prompt inspection.
    """

    def __init__(self, rules: List[ScriptRule], max_logged: int = MAX_LOGGED_REQUESTS):
        if max_logged <= 0:
            raise ProviderError(f"max_logged must be positive, got {max_logged}")
        self.rules = rules
        self._lock = threading.Lock()
        self.requests: Deque[ChatRequest] = deque(maxlen=max_logged)

    @classmethod
    def from_dict(cls, data: Dict[str, Any],
                  max_logged: int = MAX_LOGGED_REQUESTS) -> "ScriptedProvider":
        rules = data.get("rules") if isinstance(data, dict) else None
        if not isinstance(rules, list):
            raise ProviderError("scripted fixture needs a 'rules' list")
        return cls([ScriptRule.from_dict(r, i) for i, r in enumerate(rules)], max_logged)

    @classmethod
    def from_files(cls, *paths: Union[str, Path]) -> "ScriptedProvider":
        """Concatenate rules from several fixtures, in order."""
        rules: List[ScriptRule] = []
        for path in paths:
            path = Path(path)
            if not path.exists():
                raise FileNotFoundError(f"Scripted fixture not found: {path}")
            with open(path) as f:
                rules.extend(cls.from_dict(yaml.safe_load(f) or {}).rules)
        return cls(rules)

    def complete(self, request: ChatRequest) -> Completion:
        with self._lock:
            self.requests.append(request)
        for rule in self.rules:
            if rule.matches(request):
                return Completion(text=rule.reply_for(request))
        preview = request.user_prompt[:80].replace("\n", " ")
        raise ProviderError(
            f"no scripted reply for tag '{request.tag.value}' (attempt {request.attempt}): {preview!r}"
        )

    def requests_for(self, tag: Union[str, CallTag]) -> List[ChatRequest]:
        tag = CallTag(tag)
        with self._lock:
            return [r for r in self.requests if r.tag == tag]

    def clear_requests(self) -> None:
        with self._lock:
            self.requests.clear()


def make_provider(config) -> Union[HttpChatProvider, ScriptedProvider]:
    """Build the provider named by a ``ProviderConfig``."""
    if config.kind == "scripted":
        paths = [p.strip() for p in config.fixture_path.split(",") if p.strip()]
        return ScriptedProvider.from_files(*paths)
    return HttpChatProvider(
        base_url=config.base_url,
        model=config.model,
        api_key_env=config.api_key_env,
        timeout=config.timeout,
        retries=config.transport_retries,
    )
