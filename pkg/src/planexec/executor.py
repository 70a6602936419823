"""Step executor: interpret, implement, verify, validate, correct, log.

The loop walks the compiled plan from the first step, following GOTO jumps
(both directions), judging IF conditions, and expanding FORALL iterates,
until the FIN step runs or the step budget is exhausted. Every implemented
step goes through the bounded error-correction loop: implementation errors,
verification failures, and constraint violations each append a transient
``<error>`` entry and trigger another attempt; when the budget runs out, a
fall-back model call completes the step and is accepted without further
checks so the plan always finishes.
"""

from __future__ import annotations

import json
import logging
import re
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field

from . import compiler, templates
from .constraints import ConstraintEngine, RelevanceCache, Violation
from .gateway import (
    Gateway,
    GatewayError,
    GatewayRequest,
    complete_yes_no,
)
from .model import (
    CompiledPlan,
    CompiledStep,
    ExecutionContext,
    Fact,
    Fin,
    Forall,
    Goto,
    If,
    Instance,
    Plain,
    RunningStateSummary,
    StepOutcome,
    Task,
    append_skipped_step,
    append_step_output,
    append_temporary_error,
    find_step_output,
    find_step_output_block,
    format_step_instruction,
    remove_temporary_errors,
    step_output_content,
)
from .sandbox import SandboxClient, SandboxError, SandboxRequest
from .staging import RunConfig, ToolRegistry

logger = logging.getLogger(__name__)

LLM_LABEL = "LLM"
PYTHON_EXECUTOR_LABEL = "Tools: Python Executor"
FALLBACK_LABEL = "Fallback LLM"


def tool_label(name: str) -> str:
    return f"Tools: {name}"


class BudgetExceededError(RuntimeError):
    def __init__(self, limit: int, jump_trace: list[str]):
        super().__init__(
            f"step budget exhausted after {limit} steps; trace: {' -> '.join(jump_trace)}"
        )
        self.jump_trace = jump_trace


@dataclass(frozen=True)
class CodeArtifact:
    code: str
    validated: bool
    print_ensured: bool = False


@dataclass(frozen=True)
class CallPrompt:
    kind: str  # "llm_call" | "tool_call" | "code_exec" | "skip"
    messages: tuple[tuple[str, str], ...] | None = None
    tool_name: str | None = None
    tool_entrypoint: str | None = None
    tool_args: dict | None = None
    artifact: CodeArtifact | None = None


@dataclass(frozen=True)
class ErrorRecord:
    message: str


@dataclass
class TraceRecord:
    number: str
    kind: str
    reasoner: str | None = None
    attempts: int = 0
    errors: list[str] = field(default_factory=list)


_PREFIX_RE = re.compile(
    r"^(?:\((llm|python|tool)\)\s*:?|(llm|python|tool):)\s*", re.IGNORECASE
)


def split_mode_prefix(text: str) -> tuple[str, str]:
    """Strip a leading LLM:/PYTHON:/TOOL: token, returning (text, hint)."""
    m = _PREFIX_RE.match(text)
    if m:
        return text[m.end():], (m.group(1) or m.group(2)).upper()
    return text, "NONE"


def identity_filter(messages: list[dict]) -> list[dict]:
    """Default context filter: pass the full accepted history through."""
    return messages


class Engine:
    """One plan execution. Not reusable across runs."""

    def __init__(
        self,
        plan: CompiledPlan,
        task: Task,
        instance: Instance,
        registry: ToolRegistry,
        validation_items: list[str],
        facts: list[Fact],
        config: RunConfig,
        gateway: Gateway,
        sandbox: SandboxClient | None = None,
        step_observer=None,
        context_filter=identity_filter,
    ):
        self.plan = plan
        self.task = task
        self.instance = instance
        self.registry = registry
        self.validation_items = list(validation_items)
        self.facts = list(facts)
        self.config = config
        self.gateway = gateway
        self.sandbox = sandbox
        self.step_observer = step_observer
        self.context_filter = context_filter

        self.ctx = ExecutionContext()
        self.summary = RunningStateSummary()
        self.checker = ConstraintEngine(gateway, task, instance, facts)
        self.cache = RelevanceCache()
        self.trace: list[TraceRecord] = []
        self.jump_trace: list[str] = []
        self.accepted_steps = 0

    # -- plumbing -----------------------------------------------------------

    def _context_messages(self) -> list[tuple[str, str]]:
        filtered = self.context_filter(self.ctx.messages())
        return [(m["role"], m["content"]) for m in filtered]

    def _request(
        self, template_id: str, bindings: dict[str, str] | None = None,
        *, with_context: bool = False, final_user: str | None = None,
    ) -> GatewayRequest:
        rendered = templates.render(template_id, bindings or {})
        messages: list[tuple[str, str]] = [(m["role"], m["content"]) for m in rendered]
        if with_context:
            head, tail = messages[:1], messages[1:]
            messages = head + self._context_messages() + tail
        if final_user is not None:
            messages.append(("user", final_user))
        return GatewayRequest(template_id=template_id, messages=tuple(messages))

    def _observe(self, step: CompiledStep, kind: str) -> None:
        if self.step_observer is not None:
            self.step_observer(self, step, kind)

    # -- main loop ------------------------------------------------------------

    def run(self) -> tuple[ExecutionContext, RunningStateSummary]:
        if self.config.max_total_steps < len(self.plan.steps):
            raise ValueError("max_total_steps is smaller than the plan")
        self._seed_context()
        pos = 0
        visited = 0
        while pos < len(self.plan.steps):
            step = self.plan.steps[pos]
            visited += 1
            self.jump_trace.append(step.number)
            if visited > self.config.max_total_steps:
                raise BudgetExceededError(self.config.max_total_steps, self.jump_trace)

            directive = step.directive
            if isinstance(directive, Fin):
                self._finish(step)
                break
            if isinstance(directive, Goto):
                pos = self._jump(step, pos, directive.target)
                continue
            if isinstance(directive, If):
                pos = self._run_if(step, pos)
                continue
            if isinstance(directive, Forall):
                self._run_forall(step)
                pos += 1
                continue
            assert isinstance(directive, Plain)
            self.correct_errors(step, directive.instruction, step.hint)
            pos += 1
        return self.ctx, self.summary

    def _seed_context(self) -> None:
        rendered = templates.render(
            "executor_system",
            {
                "task": self.task.text,
                "instance": self.instance.text,
                "function_descriptions": self.registry.rendered_descriptions,
            },
        )
        self.ctx.append_system(rendered[0]["content"])

    def _finish(self, step: CompiledStep) -> None:
        outcome = StepOutcome(output="FINISHED", reasoner_label=None)
        append_step_output(self.ctx, step, outcome)
        self.trace.append(TraceRecord(number=step.number, kind="fin"))
        self._observe(step, "fin")

    def _skip(self, step: CompiledStep, kind: str) -> None:
        append_skipped_step(self.ctx, step)
        self.trace.append(TraceRecord(number=step.number, kind=kind))
        self._observe(step, "skipped")

    def _jump(self, step: CompiledStep, pos: int, target: str) -> int:
        """Log the jump step, mark forward-skipped steps, move to the target.

        A backward jump re-executes its target; repeated numbers then appear
        in the log at distinct positions.
        """
        self._skip(step, "goto")
        target_pos = self.plan.position_of(target)
        if target_pos > pos:
            for p in range(pos + 1, target_pos):
                self._skip(self.plan.steps[p], "jumped-over")
        return target_pos

    def _run_if(self, step: CompiledStep, pos: int) -> int:
        directive = step.directive
        assert isinstance(directive, If) and directive.decomposed
        if not self.evaluate_if(directive.condition or ""):
            self._skip(step, "if-false")
            return pos + 1
        then = directive.then or ""
        target = compiler.jump_target(then)
        if target is not None:
            return self._jump(step, pos, target)
        instruction, hint = split_mode_prefix(then)
        self.correct_errors(step, instruction, hint)
        return pos + 1

    # -- keyword runtime ------------------------------------------------------

    def evaluate_if(self, condition: str) -> bool:
        request = self._request(
            "if_judge",
            {"instance": self.instance.text, "condition": condition},
            with_context=True,
        )
        return complete_yes_no(
            self.gateway, request, default=False, what="IF condition judge"
        )

    def _run_forall(self, step: CompiledStep) -> None:
        directive = step.directive
        assert isinstance(directive, Forall)
        items, item_task = compiler.decompose_forall(
            self.gateway,
            directive.source_text,
            self.task,
            self.instance,
            self.ctx.render_transcript(),
        )
        entries_mark = len(self.ctx.entries)
        log_mark = len(self.ctx.result_log)

        sections: list[str] = []
        first_label: str | None = None
        task_text, task_hint = split_mode_prefix(item_task)
        for k, item in enumerate(items, start=1):
            sub_number = f"{step.number}.{k}"
            sub_instruction = f"Current item: {item}.\n{task_text}"
            sub_step = CompiledStep(
                number=sub_number,
                text=sub_instruction,
                directive=Plain(sub_instruction),
                hint=task_hint,
            )
            outcome = self.correct_errors(
                sub_step, sub_instruction, task_hint, temporary=True
            )
            if first_label is None:
                first_label = outcome.reasoner_label
            sections.append(f"{item}: {step_output_content(outcome.output)}")

        # Sub-step material was temporary; only the aggregate is kept.
        del self.ctx.entries[entries_mark:]
        del self.ctx.result_log[log_mark:]

        aggregate = "\n\n".join(sections)
        outcome = StepOutcome(output=aggregate, reasoner_label=first_label)
        self._accept(step, outcome, directive.source_text)
        self.trace.append(
            TraceRecord(
                number=step.number,
                kind="forall",
                reasoner=first_label,
                attempts=len(items),
            )
        )

    # -- interpret -------------------------------------------------------------

    def interpret_step(self, number: str, instruction: str, hint: str) -> CallPrompt:
        """Pick the implementation mode: prefix wins, otherwise the judges."""
        if hint == "LLM":
            return self._llm_call_prompt(number, instruction)
        if hint == "PYTHON":
            return self._code_call_prompt(number, instruction)
        if hint == "TOOL":
            prompt = self._tool_call_prompt(number, instruction)
            if prompt is not None:
                return prompt
            logger.warning(
                "step %s: TOOL mode selected but no usable tool (empty registry "
                "or failed selection); falling through to the Python judge",
                number,
            )
        else:
            if self._judge_tool_usable(number, instruction):
                prompt = self._tool_call_prompt(number, instruction)
                if prompt is not None:
                    return prompt
                logger.warning(
                    "step %s: tool judged usable but no usable tool (empty "
                    "registry or failed selection); falling through to the "
                    "Python judge",
                    number,
                )
        if self.judge_python_vs_llm(number, instruction):
            return self._code_call_prompt(number, instruction)
        return self._llm_call_prompt(number, instruction)

    def _llm_call_prompt(self, number: str, instruction: str) -> CallPrompt:
        messages = tuple(self._context_messages()) + (
            ("user", format_step_instruction(number, instruction)),
        )
        return CallPrompt(kind="llm_call", messages=messages)

    def _judge_tool_usable(self, number: str, instruction: str) -> bool:
        request = self._request(
            "tool_judge",
            {"function_descriptions": self.registry.rendered_descriptions},
            with_context=True,
            final_user=format_step_instruction(number, instruction),
        )
        return complete_yes_no(self.gateway, request, default=False, what="tool judge")

    def judge_python_vs_llm(self, number: str, instruction: str) -> bool:
        request = self._request(
            "python_judge",
            with_context=True,
            final_user=format_step_instruction(number, instruction),
        )
        return complete_yes_no(
            self.gateway, request, default=False, what="Python judge"
        )

    def _tool_call_prompt(self, number: str, instruction: str) -> CallPrompt | None:
        if len(self.registry) == 0:
            return None
        request = self._request(
            "tool_select",
            {"function_descriptions": self.registry.rendered_descriptions},
            with_context=True,
            final_user=format_step_instruction(number, instruction),
        )
        reply = self.gateway.complete(request).strip()
        tool = self.registry.get(reply)
        if tool is None:
            for candidate in self.registry.tools:
                if candidate.name in reply:
                    tool = candidate
                    break
        if tool is None:
            logger.warning("tool selection produced unknown tool %r", reply)
            return None
        args = self._bind_tool_args(number, instruction, tool)
        return CallPrompt(
            kind="tool_call",
            tool_name=tool.name,
            tool_entrypoint=tool.entrypoint,
            tool_args=args,
        )

    def _bind_tool_args(self, number: str, instruction: str, tool) -> dict:
        """Ask the model for argument bindings; strings are slash-stripped."""
        request = self._request(
            "code_execution",
            with_context=True,
            final_user=(
                f"Tool: {json.dumps(tool.to_dict(), ensure_ascii=False)}\n"
                f"Step: {format_step_instruction(number, instruction)}\n"
                "Provide the arguments as a JSON object mapping parameter names "
                "to values, and nothing else."
            ),
        )
        reply = self.gateway.complete(request)
        obj = compiler.parse_dict_reply(reply) or {}
        return {
            k: v.replace("/", "") if isinstance(v, str) else v for k, v in obj.items()
        }

    def _code_call_prompt(self, number: str, instruction: str) -> CallPrompt:
        artifact = self.generate_code_loop(number, instruction)
        return CallPrompt(kind="code_exec", artifact=artifact)

    def generate_code_loop(self, number: str, instruction: str) -> CodeArtifact:
        """Generate-and-check loop, then make sure the code prints its result."""
        code = ""
        is_valid = False
        iterations = 0
        while not is_valid and iterations < self.config.max_codegen_iterations:
            request = self._request(
                "code_generation",
                {"instance": self.instance.text},
                with_context=True,
                final_user=format_step_instruction(number, instruction),
            )
            code = self.gateway.complete(request).strip()
            check = self._request("code_checker", {"code": code})
            is_valid = complete_yes_no(
                self.gateway, check, default=False, what="code checker"
            )
            iterations += 1

        add_print = self._request("code_add_print", {"code": code})
        reply = self.gateway.complete(add_print)
        if reply.strip().rstrip(".").casefold() != "no":
            code = reply.strip()
        return CodeArtifact(code=code, validated=is_valid, print_ensured=True)

    # -- implement ---------------------------------------------------------------

    def implement_step(self, call: CallPrompt) -> str | ErrorRecord:
        if call.kind == "llm_call":
            assert call.messages is not None
            request = GatewayRequest(template_id="executor_system", messages=call.messages)
            return self.gateway.complete(request).strip()
        if call.kind == "code_exec":
            return self._run_code(call)
        if call.kind == "tool_call":
            return self._run_tool(call)
        raise ValueError(f"cannot implement call prompt of kind {call.kind!r}")

    def _run_code(self, call: CallPrompt) -> str | ErrorRecord:
        artifact = call.artifact
        assert artifact is not None
        if not artifact.validated:
            return ErrorRecord(
                "generated code failed validation after "
                f"{self.config.max_codegen_iterations} attempts"
            )
        if self.sandbox is None:
            return ErrorRecord(
                "no code runner configured; cannot execute the generated code"
            )
        request = SandboxRequest(
            code=artifact.code, timeout=self.config.sandbox_timeout
        )
        try:
            result = self.sandbox.execute(request)
        except SandboxError as exc:
            return ErrorRecord(f"code runner environment error: {exc}")
        if not result.ok:
            return ErrorRecord(result.failure_summary())
        return result.stdout.rstrip("\n")

    def _run_tool(self, call: CallPrompt) -> str | ErrorRecord:
        entrypoint = call.tool_entrypoint or ""
        if not entrypoint:
            return ErrorRecord(f"tool {call.tool_name!r} has no entrypoint")
        cmd = (
            [sys.executable, entrypoint] if entrypoint.endswith(".py") else [entrypoint]
        )
        try:
            proc = subprocess.run(
                cmd,
                input=json.dumps(call.tool_args or {}, ensure_ascii=False),
                capture_output=True,
                text=True,
                timeout=self.config.sandbox_timeout,
                cwd=tempfile.gettempdir(),
            )
        except FileNotFoundError:
            return ErrorRecord(f"tool entrypoint not found: {entrypoint}")
        except subprocess.TimeoutExpired:
            return ErrorRecord(f"tool {call.tool_name!r} timed out")
        if proc.returncode != 0:
            return ErrorRecord(
                f"tool {call.tool_name!r} exited with {proc.returncode}: "
                f"{proc.stderr.strip()}"
            )
        return proc.stdout.rstrip("\n")

    # -- verify ------------------------------------------------------------------

    def verify_step_output(self, number: str, instruction: str, output: str) -> str | None:
        """Format check plus semantic check; None means the output passed."""
        found = find_step_output(output)
        if found is not None and found[0] != number:
            return f"output answers step {found[0]}, expected step {number}"
        content = found[1] if found is not None else output
        if not content.strip():
            return "empty output for a non-skip step"
        request = self._request(
            "semantic_verifier",
            with_context=True,
            final_user=(
                f"Step: {format_step_instruction(number, instruction)}\n"
                f"Output: {content}\n"
                "Does the output correctly address this step? Answer 'Yes', or "
                "'No' followed by the rationale."
            ),
        )
        reply = self.gateway.complete(request).strip()
        lowered = reply.casefold()
        if lowered.startswith("yes"):
            return None
        if lowered.startswith("no"):
            rationale = reply[2:].lstrip(" :.,-")
            return rationale or "output failed the semantic check"
        logger.warning("semantic verifier reply not Yes/No: %r; accepting", reply)
        return None

    # -- error correction -----------------------------------------------------------

    def correct_errors(
        self,
        step: CompiledStep,
        instruction: str,
        hint: str,
        *,
        temporary: bool = False,
    ) -> StepOutcome:
        """Bounded retry around interpret/implement/verify/validate."""
        record = TraceRecord(number=step.number, kind="step")
        failures = 0
        attempts = 0
        while failures <= self.config.max_retries:
            attempts += 1
            call = self.interpret_step(step.number, instruction, hint)
            produced = self.implement_step(call)
            if isinstance(produced, ErrorRecord):
                message = self._implementation_error_message(
                    step.number, instruction, produced.message
                )
                append_temporary_error(self.ctx, message)
                record.errors.append(produced.message)
                failures += 1
                continue

            rationale = self.verify_step_output(step.number, instruction, produced)
            if rationale is not None:
                message = self._verification_error_message(
                    step.number, produced, rationale
                )
                append_temporary_error(self.ctx, message)
                record.errors.append(rationale)
                failures += 1
                continue

            found = find_step_output(produced)
            content = found[1] if found is not None else produced
            if self.config.constraint_checking_enabled and self.validation_items:
                violations = self.checker.validate_step(
                    self.summary,
                    self.validation_items,
                    step.number,
                    instruction,
                    content,
                    self.cache,
                )
                if violations:
                    message = self._constraint_error_message(
                        step.number, content, violations
                    )
                    append_temporary_error(self.ctx, message)
                    record.errors.append(message)
                    failures += 1
                    continue

            outcome = StepOutcome(
                output=self._normalize_reply(produced),
                reasoner_label=self._label_for(call),
                attempts=attempts,
            )
            self._accept(step, outcome, instruction, temporary=temporary)
            record.reasoner = outcome.reasoner_label
            record.attempts = attempts
            self.trace.append(record)
            return outcome

        # Retries exhausted: fall back to a direct model completion, accepted
        # without verification or constraint checks.
        request = self._request(
            "fallback_executor",
            with_context=True,
            final_user=format_step_instruction(step.number, instruction),
        )
        reply = self.gateway.complete(request).strip()
        outcome = StepOutcome(
            output=self._normalize_reply(reply),
            reasoner_label=FALLBACK_LABEL,
            attempts=attempts,
            fallback_used=True,
        )
        self._accept(step, outcome, instruction, temporary=temporary)
        record.reasoner = FALLBACK_LABEL
        record.attempts = attempts
        self.trace.append(record)
        return outcome

    def _accept(
        self,
        step: CompiledStep,
        outcome: StepOutcome,
        instruction: str,
        *,
        temporary: bool = False,
    ) -> None:
        remove_temporary_errors(self.ctx)
        append_step_output(self.ctx, step, outcome, instruction=instruction)
        self.cache.clear(step.number)
        if temporary:
            self._observe(step, "sub-accepted")
            return
        self.accepted_steps += 1
        self.summarize_state(
            step.number, instruction, step_output_content(outcome.output)
        )
        self._observe(step, "accepted")

    @staticmethod
    def _normalize_reply(produced: str) -> str:
        """Trim prose around a wrapped reply; bare replies pass through."""
        block = find_step_output_block(produced)
        return block if block is not None else produced

    @staticmethod
    def _label_for(call: CallPrompt) -> str:
        if call.kind == "llm_call":
            return LLM_LABEL
        if call.kind == "code_exec":
            return PYTHON_EXECUTOR_LABEL
        assert call.kind == "tool_call"
        return tool_label(call.tool_name or "")

    @staticmethod
    def _implementation_error_message(number: str, instruction: str, detail: str) -> str:
        return f"Step {number} implementation error: {detail}"

    @staticmethod
    def _verification_error_message(number: str, output: str, rationale: str) -> str:
        return (
            f"Step {number} output failed verification: {rationale}\n"
            f"Output: {output}"
        )

    @staticmethod
    def _constraint_error_message(
        number: str, output: str, violations: list[Violation]
    ) -> str:
        lines = [f"Step {number} output violated constraints.", f"Output: {output}"]
        for v in violations:
            lines.append(f"Violated constraint: {v.constraint}")
            lines.append(f"Rationale: {v.reason}")
        return "\n".join(lines)

    # -- summary ---------------------------------------------------------------------

    def summarize_state(self, number: str, instruction: str, output: str) -> None:
        request = self._request(
            "state_summarizer",
            {"step_instruction": instruction, "step_output": output},
        )
        try:
            line = self.gateway.complete(request).strip()
        except GatewayError as exc:
            logger.warning("state summarizer failed (%s); using truncated output", exc)
            line = output[:200] if output else "the output was empty"
        self.summary.add(number, line)
