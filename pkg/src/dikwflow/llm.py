"""Provider-agnostic chat-completion adapter with record/replay cassettes.

Four modes:
  live    call the configured HTTP endpoint
  record  call it and persist each exchange as a cassette file
  replay  answer only from cassettes; any unrecorded request is an error
  canned  deterministic local responses, no cassettes, no network

This module is the only place in the package that performs network I/O
(a test greps the source tree to keep it that way).
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import requests

from .artifacts import Layer
from .canonical import digest_hex
from . import textgen

PROMPT_VERSION = 1

DEFAULT_TEMPERATURE = {
    Layer.DATA: 0.0,
    Layer.INFORMATION: 0.0,
    Layer.KNOWLEDGE: 0.0,  # auditable rationale
    Layer.WISDOM: 0.7,  # creative drafting
}

_PROMPT_FILES = {
    Layer.DATA: "data.txt",
    Layer.INFORMATION: "information.txt",
    Layer.KNOWLEDGE: "knowledge.txt",
    Layer.WISDOM: "wisdom.txt",
}


class LlmMode(str, Enum):
    LIVE = "live"
    RECORD = "record"
    REPLAY = "replay"
    CANNED = "canned"


class CassetteMiss(LookupError):
    def __init__(self, exchange_id: str):
        super().__init__(f"no recorded exchange for request {exchange_id}")
        self.exchange_id = exchange_id


class TransportError(RuntimeError):
    pass


class SchemaViolation(ValueError):
    pass


def load_prompt(layer: Layer) -> str:
    ref = resources.files("dikwflow").joinpath("prompts", _PROMPT_FILES[layer])
    text = ref.read_text(encoding="utf-8")
    if not text.strip():
        raise SchemaViolation(f"prompt asset for {layer.value} is empty")
    return text


@dataclass(frozen=True)
class CompletionRequest:
    layer: Layer
    user_content: str
    temperature: float | None = None
    max_tokens: int = 512

    def resolved_temperature(self) -> float:
        if self.temperature is not None:
            return self.temperature
        return DEFAULT_TEMPERATURE[self.layer]

    def wire(self) -> dict[str, Any]:
        return {
            "system_prompt_ref": f"{self.layer.value}/v{PROMPT_VERSION}",
            "user_content": self.user_content,
            "params": {
                "temperature": self.resolved_temperature(),
                "max_tokens": self.max_tokens,
            },
        }

    @property
    def exchange_id(self) -> str:
        return digest_hex(self.wire())


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def canned_response(request: CompletionRequest) -> str:
    """Deterministic local response keyed by layer."""
    layer = request.layer
    if layer is Layer.KNOWLEDGE:
        # rationale template: echoes the hypothesis text verbatim
        return (
            f"Canned rationale: the claim \"{request.user_content}\" is "
            "consistent with established engagement-messaging findings; "
            "treat as advisory text only."
        )
    if layer is Layer.WISDOM:
        # message drafting: the request may carry grammar parameters
        try:
            params = json.loads(request.user_content)
            return textgen.compose(
                tags=tuple(params["tags"]),
                register=textgen.Register(params.get("register", "action_oriented")),
                variation=int(params.get("variation", 0)),
            )
        except (json.JSONDecodeError, KeyError, TypeError):
            return textgen.compose(("default",), textgen.Register.ACTION_ORIENTED, 0)
    if layer is Layer.INFORMATION:
        return "Canned summary: statistics computed; see artifact payload."
    return "Canned documentation: dataset validated; see artifact payload."


class LlmAdapter:
    """Shareable across threads; per-request independence."""

    def __init__(
        self,
        mode: LlmMode = LlmMode.CANNED,
        cassette_dir: str | Path | None = None,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        response_path: tuple = ("choices", 0, "message", "content"),
        max_retries: int = 3,
        backoff_seconds: float = 0.5,
    ):
        self.mode = mode
        self.cassette_dir = Path(cassette_dir) if cassette_dir else None
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.response_path = response_path
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        if mode in (LlmMode.RECORD, LlmMode.REPLAY) and self.cassette_dir is None:
            raise ValueError(f"{mode.value} mode requires a cassette directory")
        if mode in (LlmMode.LIVE, LlmMode.RECORD) and not endpoint:
            raise ValueError(f"{mode.value} mode requires an endpoint")

    @classmethod
    def from_env(cls, cassette_dir: str | Path | None = None) -> "LlmAdapter":
        mode = LlmMode(os.environ.get("DIKWFLOW_LLM_MODE", "canned").lower())
        return cls(
            mode=mode,
            cassette_dir=cassette_dir or os.environ.get("DIKWFLOW_LLM_CASSETTES"),
            endpoint=os.environ.get("DIKWFLOW_LLM_ENDPOINT"),
            api_key=os.environ.get("DIKWFLOW_LLM_API_KEY"),
            model=os.environ.get("DIKWFLOW_LLM_MODEL", "chat-default"),
        )

    # -- cassette layout: one JSON file per exchange, named by request hash

    def _cassette_path(self, exchange_id: str) -> Path:
        assert self.cassette_dir is not None
        return self.cassette_dir / f"{exchange_id}.json"

    def _store_exchange(self, request: CompletionRequest, text: str) -> None:
        self.cassette_dir.mkdir(parents=True, exist_ok=True)
        exchange = {
            "id": request.exchange_id,
            "request": request.wire(),
            "response": {"text": text, "finish_reason": "stop"},
            "recorded_at": _utc_now(),
        }
        path = self._cassette_path(request.exchange_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(exchange, indent=2, ensure_ascii=False), encoding="utf-8")
        tmp.replace(path)

    def _load_exchange(self, request: CompletionRequest) -> str:
        path = self._cassette_path(request.exchange_id)
        if not path.exists():
            raise CassetteMiss(request.exchange_id)
        exchange = json.loads(path.read_text(encoding="utf-8"))
        return exchange["response"]["text"]

    # -- transport

    def _http_call(self, request: CompletionRequest) -> str:
        payload = {
            "model": self.model or "chat-default",
            "messages": [
                {"role": "system", "content": load_prompt(request.layer)},
                {"role": "user", "content": request.user_content},
            ],
            "temperature": request.resolved_temperature(),
            "max_tokens": request.max_tokens,
        }
        headers = {"content-type": "application/json"}
        if self.api_key:
            headers["authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                response = requests.post(
                    self.endpoint, json=payload, headers=headers, timeout=60
                )
                response.raise_for_status()
                body = response.json()
                return self._extract(body)
            except SchemaViolation:
                raise
            except Exception as exc:  # network and HTTP-status failures
                last_error = exc
                time.sleep(self.backoff_seconds * (2**attempt))
        raise TransportError(f"endpoint failed after {self.max_retries} attempts: {last_error}")

    def _extract(self, body: Mapping[str, Any]) -> str:
        node: Any = body
        for step in self.response_path:
            try:
                node = node[step]
            except (KeyError, IndexError, TypeError):
                raise SchemaViolation(
                    f"response path {self.response_path} not found in body"
                ) from None
        if not isinstance(node, str) or not node.strip():
            raise SchemaViolation("response text empty or not a string")
        return node

    # -- public entry point

    def complete(self, request: CompletionRequest) -> tuple[str, str]:
        """Returns (response_text, exchange_id)."""
        exchange_id = request.exchange_id
        if self.mode is LlmMode.CANNED:
            return canned_response(request), exchange_id
        if self.mode is LlmMode.REPLAY:
            return self._load_exchange(request), exchange_id
        try:
            text = self._http_call(request)
        except SchemaViolation:
            # one reprompt with an explicit format reminder, then give up
            retry = CompletionRequest(
                layer=request.layer,
                user_content=request.user_content + "\n\nRespond with plain text only.",
                temperature=request.temperature,
                max_tokens=request.max_tokens,
            )
            text = self._http_call(retry)
        if self.mode is LlmMode.RECORD:
            self._store_exchange(request, text)
        return text, exchange_id
