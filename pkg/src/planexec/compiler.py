"""Plan compiler: numbered natural-language lines in, executable plan out.

Parsing and keyword detection are purely lexical. IF steps are split into
condition/then eagerly (the split needs only the statement text); FORALL
iterate lists are resolved at execution time because they may refer to the
outputs of earlier steps. A FIN step is appended so the executor has an
explicit terminator, and every jump target is checked against the step
index before execution starts.
"""

from __future__ import annotations

import ast
import json
import logging
import re
from dataclasses import dataclass

from . import templates
from .gateway import Gateway, GatewayRequest, complete_with_nudge
from .model import (
    CompileError,
    CompiledPlan,
    CompiledStep,
    Fin,
    Forall,
    Goto,
    If,
    Instance,
    Plain,
    RawStep,
    StepDirective,
    Task,
)

logger = logging.getLogger(__name__)

_STEP_LINE_RE = re.compile(r"^\s*(\d+(?:\.\d+)*)[.)]\s+(.*)$")
_PREFIX_RE = re.compile(
    r"^(?:\((llm|python|tool)\)\s*:?|(llm|python|tool):)\s*", re.IGNORECASE
)
_GOTO_TARGET_RE = re.compile(r"^goto\s*:?\s+step\s+(\d+(?:\.\d+)*)", re.IGNORECASE)
_JUMP_PHRASE_RE = re.compile(
    r"^\s*(?:go\s*to|goto)\s*:?\s*(?:step\s+)?(\d+(?:\.\d+)*)\s*\.?\s*$", re.IGNORECASE
)


@dataclass(frozen=True)
class PlanSource:
    text: str


def parse_plan(src: PlanSource) -> list[RawStep]:
    """Split the plan into numbered steps.

    A step starts at a line matching ``<dotted number>.`` or ``<dotted
    number>)``; later non-matching lines continue the current step. A
    leading LLM:/PYTHON:/TOOL: token (bare or parenthesized) becomes the
    step's mode hint and is stripped from the text.
    """
    collected: list[tuple[str, list[str]]] = []
    for line in src.text.splitlines():
        m = _STEP_LINE_RE.match(line)
        if m:
            collected.append((m.group(1), [m.group(2).strip()]))
        elif line.strip() and collected:
            collected[-1][1].append(line.strip())
    if not collected:
        raise CompileError("no numbered steps found in plan")

    seen: set[str] = set()
    steps: list[RawStep] = []
    for number, pieces in collected:
        if number in seen:
            raise CompileError(f"duplicate step number: {number}")
        seen.add(number)
        text = " ".join(piece for piece in pieces if piece)
        hint = "NONE"
        pm = _PREFIX_RE.match(text)
        if pm:
            hint = (pm.group(1) or pm.group(2)).upper()
            text = text[pm.end():]
        steps.append(RawStep(number=number, text=text, hint=hint))
    return steps


def detect_directive(step: RawStep) -> StepDirective:
    """Lexical keyword classification on the first token; no model call."""
    text = step.text
    first = text.split(None, 1)[0].rstrip(":").upper() if text.split() else ""
    if first == "GOTO":
        m = _GOTO_TARGET_RE.match(text)
        if m is None:
            m = _JUMP_PHRASE_RE.match(text)
        if m is None:
            raise CompileError(f"GOTO step has no extractable target: {text!r}")
        return Goto(target=m.group(1))
    if first == "IF":
        return If(source_text=text)
    if first == "FORALL":
        return Forall(source_text=text)
    return Plain(instruction=text)


def parse_dict_reply(reply: str) -> dict | None:
    """Best-effort parse of a dictionary-shaped model reply."""
    start = reply.find("{")
    end = reply.rfind("}")
    if start < 0 or end <= start:
        return None
    body = reply[start : end + 1]
    for loads in (json.loads, ast.literal_eval):
        try:
            obj = loads(body)
        except (ValueError, SyntaxError):
            continue
        if isinstance(obj, dict):
            return obj
    return None


def normalize_jump(statement: str) -> str:
    """Rewrite a jump-only then-statement to the canonical ``goto step <n>``."""
    m = _JUMP_PHRASE_RE.match(statement)
    if m:
        return f"goto step {m.group(1)}"
    return statement


def jump_target(statement: str) -> str | None:
    m = _JUMP_PHRASE_RE.match(statement)
    return m.group(1) if m else None


_IF_NUDGE = (
    "Reply with exactly the dictionary format "
    '{"if condition": "condition","then statement": "statement"} and nothing else.'
)


def decompose_if(gateway: Gateway, step_text: str) -> tuple[str, str]:
    """Split an IF step into its condition and then-statement."""
    messages = templates.render("if_decompose", {"step_instruction": step_text})
    request = GatewayRequest.make("if_decompose", messages)

    def parse(reply: str):
        obj = parse_dict_reply(reply)
        if obj is None:
            return None
        condition = obj.get("if condition")
        then = obj.get("then statement")
        if not condition or not then:
            return None
        return str(condition).strip(), normalize_jump(str(then).strip())

    return complete_with_nudge(gateway, request, parse, _IF_NUDGE, what="IF split")


_FORALL_NUDGE = (
    "Reply with exactly the dictionary format "
    '{"items": [item1, item2, ...], "task": "task that needs to be executed for '
    'each item"} and nothing else.'
)


def decompose_forall(
    gateway: Gateway,
    step_text: str,
    task: Task,
    instance: Instance,
    chat_history: str,
) -> tuple[list[str], str]:
    """Resolve the iterate list and per-item task for a FORALL step.

    Called when the step is reached, with the chat history rendered at that
    point, so the iterates may come from earlier step outputs.
    """
    messages = templates.render(
        "forall_decompose",
        {
            "task": task.text,
            "instance": instance.text,
            "chat_history": chat_history,
            "step_instruction": step_text,
        },
    )
    request = GatewayRequest.make("forall_decompose", messages)

    def parse(reply: str):
        obj = parse_dict_reply(reply)
        if obj is None:
            return None
        items = obj.get("items")
        item_task = obj.get("task")
        if not isinstance(items, list) or not items or not item_task:
            return None
        return [str(i) for i in items], str(item_task).strip()

    return complete_with_nudge(
        gateway, request, parse, _FORALL_NUDGE, what="FORALL split"
    )


def compile_plan(
    src: PlanSource,
    task: Task,
    instance: Instance,
    gateway: Gateway,
) -> CompiledPlan:
    """Parse, classify, decompose IF steps, append FIN, and index the plan."""
    raw_steps = parse_plan(src)
    compiled: list[CompiledStep] = []
    for raw in raw_steps:
        directive = detect_directive(raw)
        if isinstance(directive, If):
            if raw.hint != "NONE":
                raise CompileError(
                    f"step {raw.number}: a mode prefix on an IF step is not "
                    "allowed; put the prefix on the then-instruction"
                )
            condition, then = decompose_if(gateway, raw.text)
            directive = If(source_text=raw.text, condition=condition, then=then)
        compiled.append(
            CompiledStep(
                number=raw.number, text=raw.text, directive=directive, hint=raw.hint
            )
        )

    fin_number = str(max(int(s.number.split(".")[0]) for s in compiled) + 1)
    compiled.append(
        CompiledStep(number=fin_number, text="FIN", directive=Fin(), hint="NONE")
    )
    plan = CompiledPlan.from_steps(compiled)

    for step in plan.steps:
        directive = step.directive
        if isinstance(directive, Goto):
            plan.position_of(directive.target)
        elif isinstance(directive, If) and directive.then:
            target = jump_target(directive.then)
            if target is not None:
                plan.position_of(target)
    return plan
