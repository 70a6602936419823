"""Core data model: plans, steps, execution context, summaries, constraints.

The execution context is an ordered chat-message history. Accepted steps
contribute exactly one instruction entry and one output entry, both in a
fixed XML shape; error entries are transient and are stripped before a
step is accepted. A parallel result log records one entry per plan step
in the order the plan was traversed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

STEP_NUMBER_RE = re.compile(r"\d+(?:\.\d+)*")

Hint = str  # one of "LLM", "PYTHON", "TOOL", "NONE"
HINTS = ("LLM", "PYTHON", "TOOL", "NONE")


class FormatError(ValueError):
    """Raised for malformed step numbers or unparseable context XML."""


def is_step_number(number: str) -> bool:
    return bool(STEP_NUMBER_RE.fullmatch(number))


# Tag bodies are entity-escaped so outputs containing literal tags (or any
# "<", ">", "&") survive a write/read round trip.

def escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def unescape_text(text: str) -> str:
    return text.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")


def format_step_instruction(number: str, instruction: str) -> str:
    """Render a step instruction in the canonical context XML shape."""
    if not is_step_number(number):
        raise FormatError(f"invalid step number: {number!r}")
    return (
        f"<step><number>{escape_text(number)}</number>"
        f"<instruction>{escape_text(instruction)}</instruction></step>"
    )


def format_step_output(number: str, output: str) -> str:
    """Render a step output in the canonical context XML shape."""
    if not is_step_number(number):
        raise FormatError(f"invalid step number: {number!r}")
    return (
        f"<step><number>{escape_text(number)}</number>"
        f"<output>{escape_text(output)}</output></step>"
    )


_INSTRUCTION_XML_RE = re.compile(
    r"<step><number>(.*?)</number><instruction>(.*)</instruction></step>", re.DOTALL
)
_OUTPUT_XML_RE = re.compile(
    r"<step><number>(.*?)</number><output>(.*)</output></step>", re.DOTALL
)


def parse_step_instruction(text: str) -> tuple[str, str]:
    m = _INSTRUCTION_XML_RE.fullmatch(text)
    if m is None:
        raise FormatError("not a step-instruction wrapper")
    return unescape_text(m.group(1)), unescape_text(m.group(2))


def parse_step_output(text: str) -> tuple[str, str]:
    m = _OUTPUT_XML_RE.fullmatch(text)
    if m is None:
        raise FormatError("not a step-output wrapper")
    return unescape_text(m.group(1)), unescape_text(m.group(2))


def find_step_output(text: str) -> tuple[str, str] | None:
    """Locate a step-output wrapper inside surrounding prose, if any.

    Returns (number, output) for the first wrapper found, or None. Used to
    normalize model replies that wrap their answer in the output format.
    """
    m = _OUTPUT_XML_RE.search(text)
    if m is None:
        return None
    return unescape_text(m.group(1)), unescape_text(m.group(2))


def find_step_output_block(text: str) -> str | None:
    """The raw wrapper substring inside ``text``, or None if not wrapped."""
    m = _OUTPUT_XML_RE.search(text)
    return m.group(0) if m is not None else None


def step_output_content(text: str) -> str:
    """The logical output: wrapper content when wrapped, the text otherwise."""
    found = find_step_output(text)
    return found[1] if found is not None else text


@dataclass(frozen=True)
class Task:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("task text is empty")


@dataclass(frozen=True)
class Instance:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("instance text is empty")


@dataclass(frozen=True)
class RawStep:
    """One parsed plan line: dotted number, instruction text, mode hint."""

    number: str
    text: str
    hint: Hint = "NONE"

    def __post_init__(self) -> None:
        if not is_step_number(self.number):
            raise FormatError(f"invalid step number: {self.number!r}")
        if self.hint not in HINTS:
            raise ValueError(f"unknown hint: {self.hint!r}")


# -- Step directives ----------------------------------------------------------
#
# A directive is what the compiler decided a step means. If and Forall are
# two-phase: detection is lexical, the condition/then split and the iterate
# list are filled in by model calls (eagerly for If, at run time for Forall).


@dataclass(frozen=True)
class Plain:
    instruction: str


@dataclass(frozen=True)
class If:
    source_text: str
    condition: str | None = None
    then: str | None = None

    @property
    def decomposed(self) -> bool:
        return self.condition is not None and self.then is not None


@dataclass(frozen=True)
class Goto:
    target: str

    def __post_init__(self) -> None:
        if not is_step_number(self.target):
            raise FormatError(f"invalid goto target: {self.target!r}")


@dataclass(frozen=True)
class Forall:
    source_text: str
    items: tuple[str, ...] | None = None
    item_task: str | None = None

    @property
    def decomposed(self) -> bool:
        return self.items is not None and self.item_task is not None


@dataclass(frozen=True)
class Fin:
    pass


StepDirective = Plain | If | Goto | Forall | Fin


@dataclass(frozen=True)
class CompiledStep:
    number: str
    text: str
    directive: StepDirective
    hint: Hint = "NONE"


class CompileError(ValueError):
    """Plan could not be compiled into an executable form."""


@dataclass(frozen=True)
class CompiledPlan:
    steps: tuple[CompiledStep, ...]
    index: dict[str, int] = field(compare=False)

    @staticmethod
    def from_steps(steps: list[CompiledStep]) -> "CompiledPlan":
        index: dict[str, int] = {}
        for pos, step in enumerate(steps):
            if step.number in index:
                raise CompileError(f"duplicate step number: {step.number}")
            index[step.number] = pos
        fins = [s for s in steps if isinstance(s.directive, Fin)]
        if len(fins) != 1 or not isinstance(steps[-1].directive, Fin):
            raise CompileError("plan must end with exactly one FIN step")
        return CompiledPlan(steps=tuple(steps), index=index)

    def position_of(self, number: str) -> int:
        try:
            return self.index[number]
        except KeyError:
            raise CompileError(f"goto target does not exist: {number}") from None


# -- Execution context ---------------------------------------------------------


@dataclass(frozen=True)
class ContextEntry:
    role: str  # "system" | "user" | "assistant"
    content: str
    transient: bool = False


@dataclass
class ResultEntry:
    step_number: str
    step: str
    reasoner: str | None = None
    output: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        d: dict = {"step_number": self.step_number, "step": self.step}
        if self.reasoner is not None:
            d["reasoner"] = self.reasoner
        d["output"] = self.output
        d["error"] = self.error
        return d


@dataclass(frozen=True)
class StepOutcome:
    """What the implementer produced for one step, after acceptance."""

    output: str
    reasoner_label: str | None
    attempts: int = 1
    fallback_used: bool = False

    def __post_init__(self) -> None:
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")


@dataclass
class ExecutionContext:
    entries: list[ContextEntry] = field(default_factory=list)
    result_log: list[ResultEntry] = field(default_factory=list)

    def append_system(self, content: str) -> None:
        self.entries.append(ContextEntry(role="system", content=content))

    def transient_count(self) -> int:
        return sum(1 for e in self.entries if e.transient)

    def messages(self) -> list[dict]:
        """Entries as role/content dicts, ready to extend into a model call."""
        return [{"role": e.role, "content": e.content} for e in self.entries]

    def render_transcript(self) -> str:
        """Plain-text transcript used where a prompt takes a chat history."""
        return "\n".join(f"{e.role}: {e.content}" for e in self.entries)

    def result_log_json(self) -> str:
        return json.dumps(
            [r.to_dict() for r in self.result_log], ensure_ascii=False, indent=2
        ) + "\n"


def append_temporary_error(ctx: ExecutionContext, message: str) -> ExecutionContext:
    """Attach an error to the context so later attempts see what went wrong."""
    if not message:
        raise ValueError("error message is empty")
    ctx.entries.append(
        ContextEntry(role="user", content=f"<error>{message}</error>", transient=True)
    )
    return ctx


def remove_temporary_errors(ctx: ExecutionContext) -> ExecutionContext:
    ctx.entries = [e for e in ctx.entries if not e.transient]
    return ctx


def append_step_output(
    ctx: ExecutionContext,
    step: CompiledStep,
    outcome: StepOutcome,
    *,
    instruction: str | None = None,
) -> ExecutionContext:
    """Accept a step: strip transient errors, append the instruction/output
    pair in XML form, and record the result-log entry.

    ``instruction`` overrides the context-entry text when the executed
    instruction differs from the plan step text (an IF's then-branch).
    The result log keeps the raw implementer output; the context entry
    stores the canonical wrapped form.
    """
    remove_temporary_errors(ctx)
    instr = step.text if instruction is None else instruction
    found = find_step_output(outcome.output)
    content = found[1] if found is not None else outcome.output
    ctx.entries.append(
        ContextEntry(role="user", content=format_step_instruction(step.number, instr))
    )
    ctx.entries.append(
        ContextEntry(
            role="assistant", content=format_step_output(step.number, content)
        )
    )
    ctx.result_log.append(
        ResultEntry(
            step_number=step.number,
            step=step.text,
            reasoner=outcome.reasoner_label,
            output=outcome.output,
            error=None,
        )
    )
    return ctx


def append_skipped_step(ctx: ExecutionContext, step: CompiledStep) -> ExecutionContext:
    """Record a step that produced no output (jumped over, false IF, GOTO)."""
    ctx.result_log.append(
        ResultEntry(step_number=step.number, step=step.text, output=None, error=None)
    )
    return ctx


# -- Running state summary ------------------------------------------------------


@dataclass(frozen=True)
class SummaryLine:
    number: str
    summary: str


@dataclass
class RunningStateSummary:
    lines: list[SummaryLine] = field(default_factory=list)

    def add(self, number: str, summary: str) -> None:
        self.lines.append(SummaryLine(number=number, summary=summary))

    def render(self) -> str:
        return "\n".join(f"Step {ln.number}: {ln.summary}" for ln in self.lines)


# -- Constraints, facts, rubrics, tools ------------------------------------------


@dataclass(frozen=True)
class ConstraintSet:
    raw: str
    items: tuple[str, ...]

    @staticmethod
    def render(items: list[str] | tuple[str, ...]) -> str:
        return "\n".join(f"{i}. {item}" for i, item in enumerate(items, start=1))


@dataclass(frozen=True)
class Fact:
    text: str


@dataclass(frozen=True)
class Rubric:
    text: str


@dataclass(frozen=True)
class ToolParam:
    param: str
    type: str
    description: str


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    input_schema: tuple[ToolParam, ...]
    output_description: str
    entrypoint: str

    def __post_init__(self) -> None:
        if not self.description:
            raise ValueError(f"tool {self.name!r} has no description")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "inputs": [
                {"param": p.param, "type": p.type, "description": p.description}
                for p in self.input_schema
            ],
            "output": self.output_description,
        }


def compiled_step_to_dict(step: CompiledStep) -> dict:
    d: dict = {"number": step.number, "text": step.text, "hint": step.hint}
    directive = step.directive
    if isinstance(directive, Plain):
        d["directive"] = {"kind": "plain", "instruction": directive.instruction}
    elif isinstance(directive, If):
        d["directive"] = {
            "kind": "if",
            "condition": directive.condition,
            "then": directive.then,
        }
    elif isinstance(directive, Goto):
        d["directive"] = {"kind": "goto", "target": directive.target}
    elif isinstance(directive, Forall):
        d["directive"] = {
            "kind": "forall",
            "items": list(directive.items) if directive.items else None,
            "item_task": directive.item_task,
        }
    elif isinstance(directive, Fin):
        d["directive"] = {"kind": "fin"}
    return d


__all__ = [
    "CompileError",
    "CompiledPlan",
    "CompiledStep",
    "ConstraintSet",
    "ContextEntry",
    "ExecutionContext",
    "Fact",
    "Fin",
    "Forall",
    "FormatError",
    "Goto",
    "Hint",
    "HINTS",
    "If",
    "Instance",
    "Plain",
    "RawStep",
    "ResultEntry",
    "Rubric",
    "RunningStateSummary",
    "StepDirective",
    "StepOutcome",
    "SummaryLine",
    "Task",
    "ToolParam",
    "ToolSpec",
    "append_skipped_step",
    "append_step_output",
    "append_temporary_error",
    "compiled_step_to_dict",
    "escape_text",
    "find_step_output",
    "find_step_output_block",
    "format_step_instruction",
    "format_step_output",
    "is_step_number",
    "parse_step_instruction",
    "parse_step_output",
    "remove_temporary_errors",
    "step_output_content",
    "unescape_text",
]
