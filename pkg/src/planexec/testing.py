"""Gateway doubles for tests and fixture authoring."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .gateway import Gateway, GatewayRequest


class ScriptExhaustedError(AssertionError):
    pass


@dataclass
class ScriptedGateway:
    """Serves canned replies per template id, in FIFO order.

    ``handler`` is consulted when a template has no queued reply; it may
    return None to signal "no answer", which raises. All requests are kept
    for assertions on what the engine actually sent.
    """

    script: dict[str, list[str]] = field(default_factory=dict)
    handler: Callable[[GatewayRequest], str | None] | None = None
    requests: list[GatewayRequest] = field(default_factory=list)

    def push(self, template_id: str, *replies: str) -> None:
        self.script.setdefault(template_id, []).extend(replies)

    def complete(self, request: GatewayRequest) -> str:
        self.requests.append(request)
        queue = self.script.get(request.template_id)
        if queue:
            return queue.pop(0)
        if self.handler is not None:
            reply = self.handler(request)
            if reply is not None:
                return reply
        raise ScriptExhaustedError(
            f"no scripted reply for template {request.template_id!r}"
        )

    def requests_for(self, template_id: str) -> list[GatewayRequest]:
        return [r for r in self.requests if r.template_id == template_id]


@dataclass
class CountingGateway:
    """Wraps a gateway and tallies calls per template id."""

    inner: Gateway
    counts: Counter = field(default_factory=Counter)

    def complete(self, request: GatewayRequest) -> str:
        self.counts[request.template_id] += 1
        return self.inner.complete(request)

    def total(self) -> int:
        return sum(self.counts.values())

    def count(self, *template_ids: str) -> int:
        return sum(self.counts[t] for t in template_ids)

    def reset(self) -> None:
        self.counts.clear()
