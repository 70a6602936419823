"""Constraint validation pipeline.

A step output is validated in stages: a gate call decides whether the step
restricts the solution space at all; relevant constraints are filtered one
by one; each relevant constraint then gets a reason paragraph followed by a
strict violated/not-violated judgment. Reason and judgment are split so a
single ambiguous reply cannot both claim and deny a violation, and the
judge never sees the instance, only the constraint and the reason.

Gate verdict and relevant list are cached per step so retries of the same
step re-run only the reason/judge stages.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from . import templates
from .gateway import (
    Gateway,
    GatewayRequest,
    ProtocolError,
    complete_with_nudge,
    complete_yes_no,
)
from .model import Fact, Instance, RunningStateSummary, Task

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Violation:
    constraint: str
    reason: str

    def __post_init__(self) -> None:
        if not self.reason:
            raise ValueError("violation reason is empty")


@dataclass
class _CacheEntry:
    should_check: bool | None = None
    relevant: list[str] | None = None


@dataclass
class RelevanceCache:
    """Per-step cache, cleared when the step is accepted or its retries end."""

    entries: dict[str, _CacheEntry] = field(default_factory=dict)

    def entry(self, step_number: str) -> _CacheEntry:
        return self.entries.setdefault(step_number, _CacheEntry())

    def clear(self, step_number: str) -> None:
        self.entries.pop(step_number, None)


class ConstraintEngine:
    def __init__(
        self,
        gateway: Gateway,
        task: Task,
        instance: Instance,
        facts: list[Fact] | None = None,
    ):
        self.gateway = gateway
        self.task = task
        self.instance = instance
        self.facts = list(facts or [])

    # -- prompt bindings --------------------------------------------------

    def _facts_inline(self) -> str:
        return "\n".join(f.text for f in self.facts)

    def _facts_block(self) -> str:
        if not self.facts:
            return ""
        return "Facts:\n" + "\n".join(f"- {f.text}" for f in self.facts) + "\n"

    def _current_state(
        self, summary: RunningStateSummary, step_number: str, instruction: str, output: str
    ) -> str:
        lines = summary.render()
        tail = (
            f"Last executed step {step_number} instruction: {instruction}\n"
            f"Last executed step {step_number} output: {output}"
        )
        return f"{lines}\n{tail}" if lines else tail

    # -- pipeline stages --------------------------------------------------

    def should_check(
        self,
        summary: RunningStateSummary,
        step_number: str,
        instruction: str,
        output: str,
    ) -> bool:
        """Gate: does this step restrict the solution space?"""
        if not output.strip():
            return False
        messages = templates.render(
            "restriction_decision",
            {
                "task": self.task.text,
                "instance": self.instance.text,
                "facts": self._facts_inline(),
                "step_text": f"{instruction}\n{output}",
            },
        )
        request = GatewayRequest.make("restriction_decision", messages)
        return complete_yes_no(
            self.gateway, request, default=True, what="restriction gate"
        )

    def filter_relevant(
        self, constraints: list[str], step_number: str, instruction: str
    ) -> list[str]:
        """One yes/no relevance call per constraint, preserving order."""
        relevant: list[str] = []
        for constraint in constraints:
            messages = templates.render(
                "constraint_relevance",
                {
                    "task": self.task.text,
                    "instance": self.instance.text,
                    "step_number": step_number,
                    "step_instruction": instruction,
                    "constraint": constraint,
                },
            )
            request = GatewayRequest.make("constraint_relevance", messages)
            if complete_yes_no(
                self.gateway, request, default=True, what="constraint relevance"
            ):
                relevant.append(constraint)
        return relevant

    def give_reason(
        self,
        constraint: str,
        summary: RunningStateSummary,
        step_number: str,
        instruction: str,
        output: str,
    ) -> str:
        messages = templates.render(
            "constraint_reason",
            {
                "facts": self._facts_block(),
                "current_state": self._current_state(
                    summary, step_number, instruction, output
                ),
                "constraint": constraint,
            },
        )
        request = GatewayRequest.make("constraint_reason", messages)

        def parse(reply: str):
            text = reply.strip()
            return text or None

        try:
            return complete_with_nudge(
                self.gateway,
                request,
                parse,
                "Print ONLY the explanation paragraph.",
                what="constraint reason",
            )
        except ProtocolError:
            logger.warning("empty constraint reason for %r", constraint)
            return "no rationale produced"

    def judge_constraint(self, constraint: str, reason: str) -> bool:
        """True when the constraint is violated. Sees only constraint+reason."""
        messages = templates.render(
            "constraint_decision", {"constraint": constraint, "reason": reason}
        )
        request = GatewayRequest.make("constraint_decision", messages)
        return complete_yes_no(
            self.gateway, request, default=True, what="constraint judge"
        )

    # -- composition --------------------------------------------------------

    def validate_step(
        self,
        summary: RunningStateSummary,
        constraints: list[str],
        step_number: str,
        instruction: str,
        output: str,
        cache: RelevanceCache,
    ) -> list[Violation]:
        """Run the full pipeline; an empty list means the output passed."""
        if not constraints:
            return []
        entry = cache.entry(step_number)
        if entry.should_check is None:
            entry.should_check = self.should_check(
                summary, step_number, instruction, output
            )
        if not entry.should_check:
            return []
        if entry.relevant is None:
            entry.relevant = self.filter_relevant(constraints, step_number, instruction)
        violations: list[Violation] = []
        for constraint in entry.relevant:
            reason = self.give_reason(
                constraint, summary, step_number, instruction, output
            )
            if self.judge_constraint(constraint, reason):
                violations.append(Violation(constraint=constraint, reason=reason))
        return violations
