"""Completion gateway: one interface for all model calls.

Backends:
  * HttpBackend    — live OpenAI-style chat-completions endpoint.
  * ReplayGateway  — deterministic playback from a fixture store; a miss is
                     an error, never a silent live call.
  * RecordingGateway — wraps any gateway and persists (digest -> response).

Requests are addressed by a content digest over (template_id, messages) so
a recorded run can be replayed byte-for-byte. Decode parameters do not
participate in the digest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

logger = logging.getLogger(__name__)


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    pass


class ReplayMissError(GatewayError):
    def __init__(self, template_id: str, digest: str):
        super().__init__(
            f"no recorded response for template {template_id!r} (digest {digest})"
        )
        self.template_id = template_id
        self.digest = digest


class ProtocolError(GatewayError):
    """The model reply did not follow the template's reply contract."""


@dataclass(frozen=True)
class DecodeParams:
    temperature: float = 0.0
    max_tokens: int = 2048


@dataclass(frozen=True)
class GatewayRequest:
    template_id: str
    messages: tuple[tuple[str, str], ...]
    decode: DecodeParams = DecodeParams()

    @staticmethod
    def make(
        template_id: str, messages: list[dict], decode: DecodeParams | None = None
    ) -> "GatewayRequest":
        return GatewayRequest(
            template_id=template_id,
            messages=tuple((m["role"], m["content"]) for m in messages),
            decode=decode or DecodeParams(),
        )

    def message_dicts(self) -> list[dict]:
        return [{"role": r, "content": c} for r, c in self.messages]


def digest(request: GatewayRequest) -> str:
    """Stable content hash over template id and rendered messages."""
    payload = json.dumps(
        {
            "template_id": request.template_id,
            "messages": [[r, c] for r, c in request.messages],
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Gateway(Protocol):
    def complete(self, request: GatewayRequest) -> str: ...


@dataclass
class FixtureStore:
    """digest -> response map persisted as JSON lines, append-only."""

    path: Path
    entries: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def load(path: str | Path) -> "FixtureStore":
        p = Path(path)
        store = FixtureStore(path=p)
        if p.exists():
            with p.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    store.entries[obj["digest"]] = obj["response"]
        return store

    def get(self, key: str) -> str | None:
        return self.entries.get(key)

    def put(self, key: str, template_id: str, response: str) -> None:
        self.entries[key] = response
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {"digest": key, "template_id": template_id, "response": response},
                    ensure_ascii=False,
                )
                + "\n"
            )


class ReplayGateway:
    def __init__(self, store: FixtureStore):
        self.store = store

    def complete(self, request: GatewayRequest) -> str:
        key = digest(request)
        response = self.store.get(key)
        if response is None:
            raise ReplayMissError(request.template_id, key)
        return response


class RecordingGateway:
    """Record mode: serve repeats from the store, persist fresh responses."""

    def __init__(self, inner: Gateway, store: FixtureStore):
        self.inner = inner
        self.store = store

    def complete(self, request: GatewayRequest) -> str:
        key = digest(request)
        cached = self.store.get(key)
        if cached is not None:
            return cached
        response = self.inner.complete(request)
        self.store.put(key, request.template_id, response)
        return response


class HttpBackend:
    """OpenAI-style chat completions over HTTP with bounded retry."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "LLM_API_KEY",
        timeout: float = 120.0,
        max_attempts: int = 3,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_attempts = max_attempts

    def complete(self, request: GatewayRequest) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": self.model,
            "messages": request.message_dicts(),
            "temperature": request.decode.temperature,
            "max_tokens": request.decode.max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                resp = requests.post(
                    f"{self.base_url}/chat/completions",
                    headers=headers,
                    json=body,
                    timeout=self.timeout,
                )
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise TransportError(f"backend returned {resp.status_code}")
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (TransportError, Exception) as exc:  # noqa: BLE001
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    delay = 2.0**attempt
                    logger.warning(
                        "gateway attempt %d failed (%s); retrying in %.0fs",
                        attempt + 1,
                        exc,
                        delay,
                    )
                    time.sleep(delay)
        raise TransportError(f"gateway call failed: {last_error}")


# -- Reply-contract helpers -----------------------------------------------------

_NUDGE_YES_NO = "Answer strictly 'Yes' or 'No'."


def normalize_yes_no(reply: str) -> bool | None:
    """Yes/No normalization: trim, strip a trailing period, case-insensitive."""
    text = reply.strip()
    if text.endswith("."):
        text = text[:-1]
    lowered = text.casefold()
    if lowered == "yes":
        return True
    if lowered == "no":
        return False
    return None


def complete_yes_no(
    gateway: Gateway,
    request: GatewayRequest,
    *,
    default: bool | None = None,
    what: str = "judge",
) -> bool:
    """Issue a one-word yes/no request, re-asking once with a nudge.

    A second malformed reply either falls back to ``default`` (with a
    warning) or raises ProtocolError when no default is given. The nudge is
    appended as an extra user message so the retry has a distinct digest and
    replays deterministically.
    """
    reply = gateway.complete(request)
    verdict = normalize_yes_no(reply)
    if verdict is not None:
        return verdict
    nudged = GatewayRequest(
        template_id=request.template_id,
        messages=request.messages + (("user", _NUDGE_YES_NO),),
        decode=request.decode,
    )
    reply = gateway.complete(nudged)
    verdict = normalize_yes_no(reply)
    if verdict is not None:
        return verdict
    if default is None:
        raise ProtocolError(f"{what} reply was not Yes/No: {reply!r}")
    logger.warning("%s reply was not Yes/No after retry; defaulting to %s", what, default)
    return default


def complete_with_nudge(
    gateway: Gateway,
    request: GatewayRequest,
    parse,
    nudge: str,
    *,
    what: str = "reply",
):
    """Issue a request whose reply must satisfy ``parse`` (returning non-None),
    re-asking once with ``nudge`` appended as a user message."""
    reply = gateway.complete(request)
    parsed = parse(reply)
    if parsed is not None:
        return parsed
    nudged = GatewayRequest(
        template_id=request.template_id,
        messages=request.messages + (("user", nudge),),
        decode=request.decode,
    )
    reply = gateway.complete(nudged)
    parsed = parse(reply)
    if parsed is not None:
        return parsed
    raise ProtocolError(f"{what} was malformed after retry: {reply[:200]!r}")
