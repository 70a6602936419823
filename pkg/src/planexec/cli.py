"""Command-line surface: run, compile, eval, replay-capture."""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path

from . import runner
from .compiler import PlanSource, compile_plan
from .executor import BudgetExceededError
from .model import Instance, Task, compiled_step_to_dict
from .staging import BackendConfig, RunConfig, ToolRegistry, ingest_user_inputs, load_tool_manifest

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 3

logger = logging.getLogger(__name__)


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("http", "replay", "record"), default="replay")
    p.add_argument("--fixtures", help="fixture file for replay/record mode")
    p.add_argument("--base-url", help="chat-completions base URL for live calls")
    p.add_argument("--model", help="model name for live calls")
    p.add_argument("--api-key-env", default="LLM_API_KEY")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", required=True, help="task description file")
    p.add_argument("--instance", required=True, help="instance file")
    p.add_argument("--plan", required=True, help="plan file")
    p.add_argument("--facts", help="facts file")
    p.add_argument("--constraints", help="user constraints file")
    p.add_argument("--rubrics", help="user rubrics file")
    p.add_argument("--tools", help="tool manifest (JSON array)")
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--max-codegen-iterations", type=int, default=3)
    p.add_argument("--max-total-steps", type=int, default=100)
    p.add_argument("--sandbox-timeout", type=float, default=10.0)
    p.add_argument("--sandbox-cmd", help="code runner command, e.g. 'node sandbox-runner/dist/main.js'")
    p.add_argument("--no-constraints", action="store_true",
                   help="disable constraint generation and checking")
    p.add_argument("--out", help="result log path (JSON)")
    p.add_argument("--trace", help="trace path (defaults to <out>.trace.txt)")
    _add_backend_flags(p)


def _backend_config(args: argparse.Namespace) -> BackendConfig:
    return BackendConfig(
        mode=args.backend,
        fixtures=args.fixtures,
        base_url=args.base_url,
        model=args.model,
        api_key_env=args.api_key_env,
    )


def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        max_retries=args.max_retries,
        max_codegen_iterations=args.max_codegen_iterations,
        max_total_steps=args.max_total_steps,
        sandbox_timeout=args.sandbox_timeout,
        constraint_checking_enabled=not args.no_constraints,
        backend=_backend_config(args),
        sandbox_cmd=shlex.split(args.sandbox_cmd) if args.sandbox_cmd else None,
    )


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write_outputs(engine, args: argparse.Namespace) -> None:
    if args.out:
        Path(args.out).write_text(engine.ctx.result_log_json(), encoding="utf-8")
        trace_path = args.trace or f"{args.out}.trace.txt"
        Path(trace_path).write_text(runner.render_trace(engine), encoding="utf-8")
    else:
        sys.stdout.write(engine.ctx.result_log_json())


def cmd_run(args: argparse.Namespace) -> int:
    config = _run_config(args)
    try:
        gateway = runner.build_gateway(config.backend)
        registry = load_tool_manifest(args.tools) if args.tools else ToolRegistry()
        user_constraints, rubrics, facts = ingest_user_inputs(
            constraints_file=args.constraints,
            rubrics_file=args.rubrics,
            facts_file=args.facts,
        )
        engine = runner.execute_run(
            _read(args.task),
            _read(args.instance),
            _read(args.plan),
            gateway=gateway,
            config=config,
            registry=registry,
            user_constraints=user_constraints,
            rubrics=rubrics,
            facts=facts,
        )
    except BudgetExceededError as exc:
        logger.error("%s", exc)
        return EXIT_BUDGET
    except Exception as exc:  # noqa: BLE001 - map every failure to a diagnostic
        logger.error("run failed: %s", exc)
        return EXIT_ERROR
    _write_outputs(engine, args)
    return EXIT_OK


def cmd_compile(args: argparse.Namespace) -> int:
    try:
        gateway = runner.build_gateway(_backend_config(args))
        plan = compile_plan(
            PlanSource(_read(args.plan)),
            Task(_read(args.task)),
            Instance(_read(args.instance)),
            gateway,
        )
    except Exception as exc:  # noqa: BLE001
        logger.error("compile failed: %s", exc)
        return EXIT_ERROR
    payload = json.dumps(
        {"steps": [compiled_step_to_dict(s) for s in plan.steps]},
        ensure_ascii=False,
        indent=2,
    ) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = _run_config(args)
    try:
        gateway = runner.build_gateway(config.backend)
        report = runner.eval_dataset(
            args.dataset, args.mode, gateway=gateway, config=config
        )
    except Exception as exc:  # noqa: BLE001
        logger.error("eval failed: %s", exc)
        return EXIT_ERROR
    payload = runner.report_json(report)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return EXIT_OK


def cmd_replay_capture(args: argparse.Namespace) -> int:
    """Run once in record mode so the fixture file can drive later replays."""
    args.backend = "record"
    if not args.fixtures:
        logger.error("replay-capture needs --fixtures")
        return EXIT_ERROR
    return cmd_run(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planexec",
        description="Execute natural-language plans with control-flow keywords",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="stage, compile, and execute a plan")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_compile = sub.add_parser("compile", help="emit the compiled plan as JSON")
    p_compile.add_argument("--task", required=True)
    p_compile.add_argument("--instance", required=True)
    p_compile.add_argument("--plan", required=True)
    p_compile.add_argument("--out")
    _add_backend_flags(p_compile)
    p_compile.set_defaults(func=cmd_compile)

    p_eval = sub.add_parser("eval", help="run a dataset directory and score it")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument(
        "--mode", choices=("oracle", "exact", "model_judge"), default="oracle"
    )
    _add_run_flags_for_eval(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_capture = sub.add_parser(
        "replay-capture", help="run against a live backend, recording fixtures"
    )
    _add_run_flags(p_capture)
    p_capture.set_defaults(func=cmd_replay_capture)

    return parser


def _add_run_flags_for_eval(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--max-codegen-iterations", type=int, default=3)
    p.add_argument("--max-total-steps", type=int, default=100)
    p.add_argument("--sandbox-timeout", type=float, default=10.0)
    p.add_argument("--sandbox-cmd")
    p.add_argument("--no-constraints", action="store_true")
    p.add_argument("--out")
    _add_backend_flags(p)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
