"""Executor behavior: mode selection, code loop, retries, keywords, budget."""

from __future__ import annotations

import pytest

from planexec.executor import (
    BudgetExceededError,
    CallPrompt,
    Engine,
    ErrorRecord,
    FALLBACK_LABEL,
    LLM_LABEL,
    PYTHON_EXECUTOR_LABEL,
    split_mode_prefix,
)
from planexec.model import ToolParam, ToolSpec
from planexec.sandbox import FakeSandbox, error_result, ok_result
from planexec.staging import RunConfig, ToolRegistry

from tests.helpers import (
    INSTANCE,
    TASK,
    build_engine,
    echo_handler,
    error_messages_in,
    log_outputs,
)


def seeded(engine: Engine) -> Engine:
    engine._seed_context()
    return engine


class TestSplitModePrefix:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("LLM: do it", ("do it", "LLM")),
            ("python: compute", ("compute", "PYTHON")),
            ("(TOOL) fetch", ("fetch", "TOOL")),
            ("plain step", ("plain step", "NONE")),
        ],
    )
    def test_cases(self, text, expected):
        assert split_mode_prefix(text) == expected


class TestInterpretStep:
    def test_python_prefix_bypasses_judges(self):
        engine, counting, _ = build_engine(
            "1. PYTHON: compute something",
            script={
                "code_generation": ["print(42)"],
                "code_checker": ["Yes"],
                "code_add_print": ["No"],
            },
        )
        seeded(engine)
        call = engine.interpret_step("1", "compute something", "PYTHON")
        assert call.kind == "code_exec"
        assert counting.counts["tool_judge"] == 0
        assert counting.counts["python_judge"] == 0

    def test_llm_prefix_bypasses_judges(self):
        engine, counting, _ = build_engine("1. LLM: say hi")
        seeded(engine)
        call = engine.interpret_step("1", "say hi", "LLM")
        assert call.kind == "llm_call"
        assert counting.total() == 0

    def test_tool_no_python_yes_gives_code(self):
        engine, counting, _ = build_engine(
            "1. compute",
            script={
                "tool_judge": ["No"],
                "python_judge": ["Yes"],
                "code_generation": ["print(1)"],
                "code_checker": ["Yes"],
                "code_add_print": ["No"],
            },
            handler=None,
        )
        seeded(engine)
        call = engine.interpret_step("1", "compute", "NONE")
        assert call.kind == "code_exec"
        assert counting.counts["tool_judge"] == 1
        assert counting.counts["python_judge"] == 1

    def test_tool_yes_selects_tool(self, tmp_path):
        registry = ToolRegistry()
        registry.register(
            ToolSpec(
                name="slot_picker",
                description="picks a slot",
                input_schema=(ToolParam("day", "string", "weekday"),),
                output_description="a slot",
                entrypoint=str(tmp_path / "slot_picker.py"),
            )
        )
        engine, counting, _ = build_engine(
            "1. pick the slot",
            script={
                "tool_judge": ["Yes"],
                "tool_select": ["slot_picker"],
                "code_execution": ['{"day": "Mon/day"}'],
            },
            registry=registry,
            handler=None,
        )
        seeded(engine)
        call = engine.interpret_step("1", "pick the slot", "NONE")
        assert call.kind == "tool_call"
        assert call.tool_name == "slot_picker"
        # slashes are stripped from string arguments
        assert call.tool_args == {"day": "Monday"}

    def test_empty_registry_falls_through_to_python_judge(self):
        engine, counting, _ = build_engine(
            "1. do things",
            script={"tool_judge": ["Yes"], "python_judge": ["No"]},
            handler=None,
        )
        seeded(engine)
        call = engine.interpret_step("1", "do things", "NONE")
        assert call.kind == "llm_call"
        assert counting.counts["python_judge"] == 1


class TestGenerateCodeLoop:
    def _engine(self, checker_replies, max_iterations, gen_replies=None):
        engine, counting, scripted = build_engine(
            "1. PYTHON: compute",
            script={
                "code_generation": gen_replies
                or [f"print({i})" for i in range(len(checker_replies))],
                "code_checker": checker_replies,
                "code_add_print": ["No"],
            },
            config=RunConfig(max_codegen_iterations=max_iterations),
            handler=None,
        )
        return seeded(engine), counting

    @pytest.mark.parametrize("max_iterations", [1, 2, 3])
    def test_no_k_then_yes(self, max_iterations):
        for k in range(max_iterations):
            engine, counting = self._engine(
                ["No"] * k + ["Yes"], max_iterations
            )
            artifact = engine.generate_code_loop("1", "compute")
            assert counting.counts["code_generation"] == k + 1
            assert artifact.validated is True

    @pytest.mark.parametrize("max_iterations", [1, 2, 3])
    def test_all_no_exhausts(self, max_iterations):
        engine, counting = self._engine(["No"] * max_iterations, max_iterations)
        artifact = engine.generate_code_loop("1", "compute")
        assert counting.counts["code_generation"] == max_iterations
        assert artifact.validated is False

    def test_add_print_no_keeps_code(self):
        engine, _ = self._engine(["Yes"], 3, gen_replies=["print('x')"])
        artifact = engine.generate_code_loop("1", "compute")
        assert artifact.code == "print('x')"
        assert artifact.print_ensured

    def test_add_print_replaces_code_wholesale(self):
        engine, counting, _ = build_engine(
            "1. PYTHON: compute",
            script={
                "code_generation": ["x = 1"],
                "code_checker": ["Yes"],
                "code_add_print": ["x = 1\nprint(x)"],
            },
            handler=None,
        )
        seeded(engine)
        artifact = engine.generate_code_loop("1", "compute")
        assert artifact.code == "x = 1\nprint(x)"


class TestImplementStep:
    def test_code_exec_output(self):
        sandbox = FakeSandbox(script=[ok_result("0.25\n")])
        engine, _, _ = build_engine("1. PYTHON: x", sandbox=sandbox)
        seeded(engine)
        from planexec.executor import CodeArtifact

        call = CallPrompt(
            kind="code_exec",
            artifact=CodeArtifact(code="print(0.25)", validated=True, print_ensured=True),
        )
        assert engine.implement_step(call) == "0.25"

    def test_code_exec_exception_becomes_error_record(self):
        sandbox = FakeSandbox(
            script=[error_result("ZeroDivisionError", "division by zero", "Traceback ...")]
        )
        engine, _, _ = build_engine("1. PYTHON: x", sandbox=sandbox)
        seeded(engine)
        from planexec.executor import CodeArtifact

        call = CallPrompt(
            kind="code_exec",
            artifact=CodeArtifact(code="1/0", validated=True, print_ensured=True),
        )
        produced = engine.implement_step(call)
        assert isinstance(produced, ErrorRecord)
        assert "ZeroDivisionError" in produced.message
        assert "Traceback" in produced.message

    def test_unvalidated_artifact_fails_without_sandbox_call(self):
        sandbox = FakeSandbox()
        engine, _, _ = build_engine("1. PYTHON: x", sandbox=sandbox)
        seeded(engine)
        from planexec.executor import CodeArtifact

        call = CallPrompt(
            kind="code_exec",
            artifact=CodeArtifact(code="x", validated=False, print_ensured=True),
        )
        produced = engine.implement_step(call)
        assert isinstance(produced, ErrorRecord)
        assert sandbox.requests == []

    def test_tool_invocation_captures_stdout(self, tmp_path):
        tool = tmp_path / "upper.py"
        tool.write_text(
            "import json, sys\n"
            "args = json.loads(sys.stdin.read())\n"
            "print(args['text'].upper())\n"
        )
        engine, _, _ = build_engine("1. TOOL: upper it")
        seeded(engine)
        call = CallPrompt(
            kind="tool_call",
            tool_name="upper",
            tool_entrypoint=str(tool),
            tool_args={"text": "quiet"},
        )
        assert engine.implement_step(call) == "QUIET"

    def test_tool_nonzero_exit_is_error(self, tmp_path):
        tool = tmp_path / "bad.py"
        tool.write_text("import sys; sys.stderr.write('nope'); sys.exit(3)\n")
        engine, _, _ = build_engine("1. TOOL: x")
        seeded(engine)
        call = CallPrompt(
            kind="tool_call",
            tool_name="bad",
            tool_entrypoint=str(tool),
            tool_args={},
        )
        produced = engine.implement_step(call)
        assert isinstance(produced, ErrorRecord)
        assert "nope" in produced.message


class TestVerifyStepOutput:
    def test_exact_echo_ok(self):
        engine, _, _ = build_engine('1. LLM: Output exactly "hello"')
        seeded(engine)
        assert engine.verify_step_output("1", 'Output exactly "hello"', "hello") is None

    def test_wrong_step_number_rejected(self):
        engine, _, _ = build_engine("1. LLM: x")
        seeded(engine)
        from planexec.model import format_step_output

        rationale = engine.verify_step_output("1", "x", format_step_output("7", "y"))
        assert rationale is not None
        assert "step 7" in rationale

    def test_empty_output_rejected(self):
        engine, _, _ = build_engine("1. LLM: x")
        seeded(engine)
        assert engine.verify_step_output("1", "x", "   ") is not None

    def test_verifier_no_returns_rationale(self):
        engine, _, _ = build_engine(
            "1. LLM: x",
            script={"semantic_verifier": ["No: answers the wrong question"]},
            handler=None,
        )
        seeded(engine)
        rationale = engine.verify_step_output("1", "x", "some output")
        assert rationale == "answers the wrong question"


class TestCorrectErrors:
    def test_fail_twice_then_succeed(self):
        engine, counting, scripted = build_engine(
            '1. LLM: Output exactly "stable"',
            script={"semantic_verifier": ["No: flaky", "No: flaky again", "Yes"]},
        )
        engine.run()
        entry = engine.ctx.result_log[0]
        assert entry.output == "stable"
        assert entry.reasoner == LLM_LABEL
        assert engine.trace[0].attempts == 3
        # the third attempt saw both transient error entries
        final_request = scripted.requests_for("executor_system")[-1]
        errors = error_messages_in(final_request)
        assert len(errors) == 2
        assert "failed verification" in errors[0]
        # and after acceptance the context is clean
        assert engine.ctx.transient_count() == 0

    def test_all_fail_invokes_fallback_once(self):
        config = RunConfig(max_retries=2)
        engine, counting, _ = build_engine(
            '1. LLM: Output exactly "never good enough"',
            script={"semantic_verifier": ["No: x", "No: y", "No: z"]},
            config=config,
        )
        engine.run()
        entry = engine.ctx.result_log[0]
        assert entry.reasoner == FALLBACK_LABEL
        assert entry.output == "never good enough"
        assert counting.counts["fallback_executor"] == 1
        # verification ran only for the three loop attempts
        assert counting.counts["semantic_verifier"] == 3
        assert engine.ctx.transient_count() == 0

    def test_fallback_skips_constraint_validation(self):
        config = RunConfig(max_retries=1)
        engine, counting, _ = build_engine(
            '1. LLM: Output exactly "x"',
            script={"semantic_verifier": ["No: a", "No: b"]},
            config=config,
            validation_items=["a constraint"],
        )
        engine.run()
        assert engine.ctx.result_log[0].reasoner == FALLBACK_LABEL
        for template in (
            "restriction_decision",
            "constraint_relevance",
            "constraint_reason",
            "constraint_decision",
        ):
            assert counting.counts[template] == 0

    def test_constraint_violations_feed_retries(self):
        engine, counting, scripted = build_engine(
            '1. LLM: Output exactly "8:00 to 9:00"',
            script={
                "restriction_decision": ["Yes"],
                "constraint_relevance": ["Yes"],
                "constraint_reason": [
                    "The slot lies outside work hours.",
                    "The slot lies outside work hours.",
                    "The slot is fine now.",
                ],
                "constraint_decision": ["Yes", "Yes", "No"],
            },
            validation_items=["meeting must be within work hours"],
        )
        engine.run()
        assert engine.trace[0].attempts == 3
        final_request = scripted.requests_for("executor_system")[-1]
        errors = error_messages_in(final_request)
        assert len(errors) == 2
        assert "meeting must be within work hours" in errors[0]
        assert "outside work hours" in errors[0]
        # relevance was cached across retries
        assert counting.counts["constraint_relevance"] == 1
        assert counting.counts["restriction_decision"] == 1

    def test_implementation_error_messages_have_detail(self):
        sandbox = FakeSandbox(
            script=[
                error_result("ValueError", "bad input", "Traceback ..."),
                ok_result("42"),
            ]
        )
        engine, _, scripted = build_engine(
            "1. PYTHON: compute the answer",
            script={
                "code_generation": ["print(42)", "print(42)"],
                "code_checker": ["Yes", "Yes"],
                "code_add_print": ["No", "No"],
            },
            sandbox=sandbox,
        )
        engine.run()
        entry = engine.ctx.result_log[0]
        assert entry.output == "42"
        assert entry.reasoner == PYTHON_EXECUTOR_LABEL
        assert engine.trace[0].attempts == 2
        assert any("ValueError" in e for e in engine.trace[0].errors)


class TestKeywordRuntime:
    def test_goto_example_log_shape(self):
        plan = (
            "1. goto step 4\n"
            '2. LLM: Output exactly "This step should be skipped."\n'
            '3. LLM: Output exactly "This step should also be skipped."\n'
            '4. LLM: Output exactly "Reached the later step through direct GOTO."\n'
            '5. LLM: Output exactly "Direct GOTO demonstration complete."\n'
        )
        engine, counting, _ = build_engine(plan)
        engine.run()
        assert log_outputs(engine) == [
            None,
            None,
            None,
            "Reached the later step through direct GOTO.",
            "Direct GOTO demonstration complete.",
            "FINISHED",
        ]
        skipped = engine.ctx.result_log[1].to_dict()
        assert "reasoner" not in skipped

    def test_if_false_skips(self):
        engine, _, _ = build_engine(
            "1. IF 10 is less than 3 according to the input text, then LLM: "
            'Output exactly "False math branch activated."\n'
            '2. LLM: Output exactly "Continue after the false mathematical IF."\n',
            script={
                "if_decompose": [
                    '{"if condition": "10 is less than 3 according to the input '
                    'text","then statement": "LLM: Output exactly \\"False math '
                    'branch activated.\\""}'
                ],
                "if_judge": ["No"],
            },
        )
        engine.run()
        assert log_outputs(engine) == [
            None,
            "Continue after the false mathematical IF.",
            "FINISHED",
        ]

    def test_if_true_executes_then_instruction(self):
        engine, _, _ = build_engine(
            "1. IF 12 is greater than 7 according to the input text, then LLM: "
            'Output exactly "Math branch activated because 12 > 7."\n'
            '2. LLM: Output exactly "Continue with the verified arithmetic storyline."\n',
            script={
                "if_decompose": [
                    '{"if condition": "12 is greater than 7 according to the '
                    'input text","then statement": "LLM: Output exactly \\"Math '
                    'branch activated because 12 > 7.\\""}'
                ],
                "if_judge": ["Yes"],
            },
        )
        engine.run()
        assert log_outputs(engine) == [
            "Math branch activated because 12 > 7.",
            "Continue with the verified arithmetic storyline.",
            "FINISHED",
        ]
        # the log keeps the authored IF text, the context the then-instruction
        assert engine.ctx.result_log[0].step.startswith("IF 12 is greater")
        assert engine.ctx.result_log[0].reasoner == LLM_LABEL

    def test_if_then_goto_transfers_control(self):
        engine, _, _ = build_engine(
            "1. IF the routing note says jump, then goto step 3\n"
            '2. LLM: Output exactly "should be skipped"\n'
            '3. LLM: Output exactly "landed"\n',
            script={
                "if_decompose": [
                    '{"if condition": "the routing note says jump",'
                    '"then statement": "goto step 3"}'
                ],
                "if_judge": ["Yes"],
            },
        )
        engine.run()
        assert log_outputs(engine) == [None, None, "landed", "FINISHED"]

    def test_if_protocol_error_treated_as_false(self):
        engine, _, _ = build_engine(
            "1. IF c, then LLM: Output exactly \"never\"\n"
            '2. LLM: Output exactly "after"\n',
            script={
                "if_decompose": ['{"if condition": "c","then statement": "t"}'],
                "if_judge": ["cannot tell", "still cannot tell"],
            },
        )
        engine.run()
        assert log_outputs(engine) == [None, "after", "FINISHED"]

    def test_backward_goto_re_executes(self):
        # 1 runs, 2 jumps back to 1 (re-executes), then 1 jumps... would loop;
        # bounded budget cuts it off.
        plan = "1. LLM: Output exactly \"ping\"\n2. goto step 1\n"
        engine, _, _ = build_engine(
            plan, config=RunConfig(max_total_steps=7)
        )
        with pytest.raises(BudgetExceededError) as err:
            engine.run()
        numbers = [e.step_number for e in engine.ctx.result_log]
        assert numbers.count("1") >= 2  # re-executed with distinct log positions
        assert err.value.jump_trace[:4] == ["1", "2", "1", "2"]

    def test_self_goto_budget_exhaustion(self):
        engine, _, _ = build_engine(
            "1. goto step 1", config=RunConfig(max_total_steps=5)
        )
        with pytest.raises(BudgetExceededError):
            engine.run()
        assert len(engine.jump_trace) == 6  # 5 allowed + the overflowing visit


class TestForall:
    FORALL_PLAN = (
        "1. FORALL New York monuments or landmarks listed in the input text: "
        "LLM: Write a vivid story of about 100 words centered on that monument."
    )
    DECOMPOSE_REPLY = (
        '{"items": ["Statue of Liberty", "Brooklyn Bridge", "Empire State '
        'Building"], "task": "LLM: Write a vivid story of about 100 words '
        'centered on that monument."}'
    )

    def _story_handler(self, request):
        if request.template_id == "executor_system":
            user = request.messages[-1][1]
            import re as _re

            m = _re.search(r"Current item: (.*?)\.", user)
            return f"A story about {m.group(1)}."
        return echo_handler(request)

    def test_monuments_run(self):
        engine, counting, _ = build_engine(
            self.FORALL_PLAN,
            script={"forall_decompose": [self.DECOMPOSE_REPLY]},
            handler=self._story_handler,
        )
        engine.run()
        aggregate = engine.ctx.result_log[0].output
        for monument in ("Statue of Liberty", "Brooklyn Bridge", "Empire State Building"):
            assert f"{monument}: A story about {monument}." in aggregate
        # one executor call per item
        assert counting.counts["executor_system"] == 3
        # exactly one permanent log entry + FIN; sub-material discarded
        assert len(engine.ctx.result_log) == 2
        assert len(engine.summary.lines) == 1
        assert engine.accepted_steps == 1

    def test_sub_steps_see_item_binding(self):
        engine, _, scripted = build_engine(
            self.FORALL_PLAN,
            script={"forall_decompose": [self.DECOMPOSE_REPLY]},
            handler=self._story_handler,
        )
        engine.run()
        sub_requests = scripted.requests_for("executor_system")
        assert 'Current item: Statue of Liberty.' in sub_requests[0].messages[-1][1]

    def test_single_item(self):
        engine, counting, _ = build_engine(
            "1. FORALL x: LLM: describe it",
            script={
                "forall_decompose": ['{"items": ["one thing"], "task": "LLM: Output exactly \\"solo\\""}']
            },
        )
        engine.run()
        assert engine.ctx.result_log[0].output == "one thing: solo"

    def test_python_item_task_uses_code_path(self):
        sandbox = FakeSandbox(script=[ok_result("4"), ok_result("9")])
        engine, counting, _ = build_engine(
            "1. FORALL listed numbers: PYTHON: square it",
            script={
                "forall_decompose": [
                    '{"items": ["2", "3"], "task": "PYTHON: square it"}'
                ],
                "code_generation": ["print(2*2)", "print(3*3)"],
                "code_checker": ["Yes", "Yes"],
                "code_add_print": ["No", "No"],
            },
            sandbox=sandbox,
        )
        engine.run()
        assert engine.ctx.result_log[0].output == "2: 4\n\n3: 9"
        assert engine.ctx.result_log[0].reasoner == PYTHON_EXECUTOR_LABEL
        assert counting.counts["python_judge"] == 0


class TestRunPlumbing:
    def test_context_seeded_with_tools_and_formats(self):
        registry = ToolRegistry()
        registry.register(
            ToolSpec(
                name="echo",
                description="echoes",
                input_schema=(),
                output_description="same text",
                entrypoint="echo.py",
            )
        )
        engine, _, _ = build_engine('1. LLM: Output exactly "x"', registry=registry)
        engine.run()
        seed = engine.ctx.entries[0]
        assert seed.role == "system"
        assert TASK.text in seed.content
        assert "<step><number>" in seed.content
        assert '"echo"' in seed.content

    def test_summary_lines_match_accepted_steps(self):
        engine, _, _ = build_engine(
            '1. LLM: Output exactly "a"\n2. goto step 4\n3. LLM: Output exactly "b"\n'
            '4. LLM: Output exactly "c"\n',
        )
        engine.run()
        assert engine.accepted_steps == 2  # steps 1 and 4
        assert len(engine.summary.lines) == 2
        assert [ln.number for ln in engine.summary.lines] == ["1", "4"]

    def test_observer_sees_clean_context(self):
        observed = []

        def observer(engine, step, kind):
            observed.append((step.number, kind, engine.ctx.transient_count()))

        engine, _, _ = build_engine(
            '1. LLM: Output exactly "a"', step_observer=observer
        )
        engine.run()
        assert ("1", "accepted", 0) in observed
        assert observed[-1][1] == "fin"

    def test_ablation_zero_constraint_calls(self):
        config = RunConfig(constraint_checking_enabled=False)
        engine, counting, _ = build_engine(
            '1. LLM: Output exactly "x"',
            config=config,
            validation_items=["c1", "c2"],
        )
        engine.run()
        for template in (
            "restriction_decision",
            "constraint_relevance",
            "constraint_reason",
            "constraint_decision",
        ):
            assert counting.counts[template] == 0

    def test_summarizer_failure_uses_truncated_output(self):
        from planexec.gateway import GatewayError

        class FlakyGateway:
            def __init__(self, inner):
                self.inner = inner

            def complete(self, request):
                if request.template_id == "state_summarizer":
                    raise GatewayError("summarizer offline")
                return self.inner.complete(request)

        engine, _, scripted = build_engine('1. LLM: Output exactly "kept anyway"')
        engine.gateway = FlakyGateway(engine.gateway)
        engine.run()
        assert engine.summary.lines[0].summary == "kept anyway"

    def test_noisy_python_judge_defaults_to_llm(self):
        engine, counting, _ = build_engine(
            "1. decide something",
            script={
                "tool_judge": ["No"],
                "python_judge": ["It depends on the step", "hard to say"],
            },
            handler=None,
        )
        seeded(engine)
        call = engine.interpret_step("1", "decide something", "NONE")
        assert call.kind == "llm_call"

    def test_max_total_steps_must_cover_plan(self):
        engine, _, _ = build_engine(
            "\n".join(f'{i}. LLM: Output exactly "x"' for i in range(1, 6)),
            config=RunConfig(max_total_steps=3),
        )
        with pytest.raises(ValueError, match="max_total_steps"):
            engine.run()
