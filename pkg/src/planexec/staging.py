"""Initialization and staging: tool registry, run configuration, and the
constraint/rubric/fact inputs a run starts from.

Constraints come from two places: the user (files) and an autonomous
generation pass over the task-instance pair. Generated constraints come
first in the aggregated validation list, then user constraints, then
rubrics. Facts are never merged into that list; they only assist the
validation prompts.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import templates
from .gateway import DecodeParams, Gateway, GatewayRequest, complete_with_nudge
from .model import ConstraintSet, Fact, Instance, Rubric, Task, ToolParam, ToolSpec

logger = logging.getLogger(__name__)


@dataclass
class ToolRegistry:
    tools: list[ToolSpec] = field(default_factory=list)

    def register(self, spec: ToolSpec) -> "ToolRegistry":
        if any(t.name == spec.name for t in self.tools):
            raise ValueError(f"tool already registered: {spec.name!r}")
        self.tools.append(spec)
        return self

    def get(self, name: str) -> ToolSpec | None:
        for tool in self.tools:
            if tool.name == name:
                return tool
        return None

    @property
    def rendered_descriptions(self) -> str:
        """JSON of names, inputs, outputs, and descriptions; regenerated
        deterministically from the registered tools."""
        return json.dumps(
            [t.to_dict() for t in self.tools], ensure_ascii=False, indent=2
        )

    def __len__(self) -> int:
        return len(self.tools)


def register_tool(registry: ToolRegistry, spec: ToolSpec) -> ToolRegistry:
    return registry.register(spec)


def load_tool_manifest(path: str | Path) -> ToolRegistry:
    """Read a JSON array of tool specs into a registry."""
    registry = ToolRegistry()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError("tool manifest must be a JSON array")
    for obj in data:
        registry.register(
            ToolSpec(
                name=obj["name"],
                description=obj["description"],
                input_schema=tuple(
                    ToolParam(
                        param=p["param"],
                        type=p.get("type", "string"),
                        description=p.get("description", ""),
                    )
                    for p in obj.get("inputs", [])
                ),
                output_description=obj.get("output", ""),
                entrypoint=obj.get("entrypoint", ""),
            )
        )
    return registry


@dataclass
class BackendConfig:
    mode: str = "replay"  # "http" | "replay" | "record"
    fixtures: str | None = None
    base_url: str | None = None
    model: str | None = None
    api_key_env: str = "LLM_API_KEY"


@dataclass
class RunConfig:
    max_retries: int = 3
    max_codegen_iterations: int = 3
    max_total_steps: int = 100
    sandbox_timeout: float = 10.0
    constraint_checking_enabled: bool = True
    backend: BackendConfig = field(default_factory=BackendConfig)
    sandbox_cmd: list[str] | None = None

    def __post_init__(self) -> None:
        for name in ("max_retries", "max_codegen_iterations", "max_total_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.sandbox_timeout <= 0:
            raise ValueError("sandbox_timeout must be positive")


# -- Constraint parsing and generation -------------------------------------------

_ITEM_START_RE = re.compile(r"^\s*\d+[.)]\s+")


def parse_constraints(raw: str) -> list[str]:
    """Split a numbered list into items.

    Item boundaries are line-leading ``N.`` (or ``N)``) markers; continuation
    lines are joined to the current item with a single space. Returns []
    (with a warning) when no numbered items are present.
    """
    items: list[str] = []
    current: list[str] = []
    for line in raw.splitlines():
        if _ITEM_START_RE.match(line):
            if current:
                items.append(" ".join(current))
            current = [_ITEM_START_RE.sub("", line).strip()]
        elif line.strip() and current:
            current.append(line.strip())
    if current:
        items.append(" ".join(current))
    if not items and raw.strip():
        logger.warning("no numbered constraint items found in %r", raw[:80])
    return items


def _strip_quoted_and_bracketed(text: str) -> str:
    text = re.sub(r'"[^"]*"', " ", text)
    text = re.sub(r"'[^']*'", " ", text)
    text = re.sub(r"\([^)]*\)", " ", text)
    return text


def lint_atomicity(items: list[str]) -> list[str]:
    """Flag items that look compound (a top-level \"and\"/\"or\")."""
    flagged = []
    for item in items:
        bare = _strip_quoted_and_bracketed(item)
        if re.search(r"\s(and|or)\s", bare, flags=re.IGNORECASE):
            flagged.append(item)
            logger.warning("constraint may not be atomic: %r", item)
    return flagged


_GENERATION_NUDGE = (
    "Output ONLY a numbered list of constraints as plain text. No headers, no "
    "explanations, no JSON, no code fences, no extra text."
)


def generate_constraints(gateway: Gateway, task: Task, instance: Instance) -> ConstraintSet:
    """Derive atomic constraints from the task-instance pair."""
    messages = templates.render(
        "constraint_generation", {"task": task.text, "instance": instance.text}
    )
    request = GatewayRequest.make("constraint_generation", messages, DecodeParams())

    def parse(reply: str):
        if "```" in reply:
            return None
        items = parse_constraints(reply)
        if not items:
            return None
        return ConstraintSet(raw=reply, items=tuple(items))

    result: ConstraintSet = complete_with_nudge(
        gateway, request, parse, _GENERATION_NUDGE, what="constraint list"
    )
    lint_atomicity(list(result.items))
    return result


# -- User-supplied inputs ---------------------------------------------------------


def _read_items(path: str | Path) -> list[str]:
    """A user file is either a numbered list or one item per line."""
    text = Path(path).read_text(encoding="utf-8")
    items = parse_constraints(text)
    if items:
        return items
    return [line.strip() for line in text.splitlines() if line.strip()]


def ingest_user_inputs(
    constraints_file: str | Path | None = None,
    rubrics_file: str | Path | None = None,
    facts_file: str | Path | None = None,
) -> tuple[list[str], list[Rubric], list[Fact]]:
    constraints = _read_items(constraints_file) if constraints_file else []
    rubrics = [Rubric(t) for t in _read_items(rubrics_file)] if rubrics_file else []
    facts = [Fact(t) for t in _read_items(facts_file)] if facts_file else []
    return constraints, rubrics, facts


def aggregate_validation_items(
    generated: ConstraintSet | None,
    user_constraints: list[str],
    rubrics: list[Rubric],
) -> list[str]:
    """Generated constraints, then user constraints, then rubrics."""
    items: list[str] = list(generated.items) if generated else []
    items.extend(user_constraints)
    items.extend(r.text for r in rubrics)
    return items
