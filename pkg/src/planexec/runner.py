"""End-to-end run orchestration shared by the CLI and the test harness."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import scheduling, templates
from .compiler import PlanSource, compile_plan
from .executor import Engine
from .gateway import (
    FixtureStore,
    Gateway,
    GatewayRequest,
    HttpBackend,
    RecordingGateway,
    ReplayGateway,
    complete_yes_no,
)
from .model import Fact, Instance, Rubric, Task, step_output_content
from .sandbox import SandboxClient, SubprocessSandbox
from .staging import (
    BackendConfig,
    RunConfig,
    ToolRegistry,
    aggregate_validation_items,
    generate_constraints,
    ingest_user_inputs,
)

logger = logging.getLogger(__name__)


def build_gateway(cfg: BackendConfig) -> Gateway:
    if cfg.mode == "replay":
        if not cfg.fixtures:
            raise ValueError("replay mode needs a fixtures file")
        return ReplayGateway(FixtureStore.load(cfg.fixtures))
    if cfg.mode == "record":
        if not cfg.fixtures:
            raise ValueError("record mode needs a fixtures file")
        if not (cfg.base_url and cfg.model):
            raise ValueError("record mode needs --base-url and --model")
        live = HttpBackend(cfg.base_url, cfg.model, api_key_env=cfg.api_key_env)
        return RecordingGateway(live, FixtureStore.load(cfg.fixtures))
    if cfg.mode == "http":
        if not (cfg.base_url and cfg.model):
            raise ValueError("http mode needs --base-url and --model")
        return HttpBackend(cfg.base_url, cfg.model, api_key_env=cfg.api_key_env)
    raise ValueError(f"unknown backend mode: {cfg.mode!r}")


def build_sandbox(config: RunConfig) -> SandboxClient | None:
    if config.sandbox_cmd:
        return SubprocessSandbox(config.sandbox_cmd)
    return None


def execute_run(
    task_text: str,
    instance_text: str,
    plan_text: str,
    *,
    gateway: Gateway,
    config: RunConfig,
    registry: ToolRegistry | None = None,
    user_constraints: list[str] | None = None,
    rubrics: list[Rubric] | None = None,
    facts: list[Fact] | None = None,
    sandbox: SandboxClient | None = None,
    step_observer=None,
) -> Engine:
    """Stage, compile, and execute one plan; returns the finished engine."""
    task = Task(task_text)
    instance = Instance(instance_text)
    registry = registry or ToolRegistry()

    generated = None
    if config.constraint_checking_enabled:
        generated = generate_constraints(gateway, task, instance)
    validation_items = aggregate_validation_items(
        generated, user_constraints or [], rubrics or []
    )

    plan = compile_plan(PlanSource(plan_text), task, instance, gateway)
    engine = Engine(
        plan=plan,
        task=task,
        instance=instance,
        registry=registry,
        validation_items=validation_items,
        facts=facts or [],
        config=config,
        gateway=gateway,
        sandbox=sandbox if sandbox is not None else build_sandbox(config),
        step_observer=step_observer,
    )
    engine.run()
    return engine


def render_trace(engine: Engine) -> str:
    lines = []
    for record in engine.trace:
        head = f"step {record.number} [{record.kind}]"
        if record.reasoner:
            head += f" reasoner={record.reasoner}"
        if record.attempts:
            head += f" attempts={record.attempts}"
        lines.append(head)
        for err in record.errors:
            first = err.splitlines()[0] if err else ""
            lines.append(f"  error: {first}")
    return "\n".join(lines) + "\n"


def final_answer(engine: Engine) -> str | None:
    """The last accepted non-control output, unwrapped."""
    for entry in reversed(engine.ctx.result_log):
        if entry.step == "FIN" or entry.output is None:
            continue
        return step_output_content(entry.output)
    return None


# -- Dataset evaluation -----------------------------------------------------------


@dataclass
class InstanceFiles:
    id: str
    task: str
    instance: str
    plan: str
    gold: str
    facts: list[Fact] = field(default_factory=list)


def load_dataset(dataset_dir: str | Path) -> list[InstanceFiles]:
    root = Path(dataset_dir)
    instances = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        facts: list[Fact] = []
        facts_file = d / "facts.txt"
        if facts_file.exists():
            _, _, facts = ingest_user_inputs(facts_file=facts_file)
        instances.append(
            InstanceFiles(
                id=d.name,
                task=(d / "task.txt").read_text(encoding="utf-8"),
                instance=(d / "instance.txt").read_text(encoding="utf-8"),
                plan=(d / "plan.txt").read_text(encoding="utf-8"),
                gold=(d / "gold.txt").read_text(encoding="utf-8").strip(),
                facts=facts,
            )
        )
    return instances


def _score_oracle(answer: str, inst: InstanceFiles) -> str:
    try:
        parsed = scheduling.parse_calendar_answer(answer)
        spec = scheduling.parse_instance(inst.instance)
    except scheduling.CalendarParseError as exc:
        logger.warning("instance %s: %s", inst.id, exc)
        return "parse_error"
    valid, _ = scheduling.verify_calendar(parsed, spec)
    return "valid" if valid else "invalid"


def _score_model_judge(gateway: Gateway, answer: str, gold: str) -> str:
    messages = templates.render(
        "answer_equivalence", {"answer": answer, "gold": gold}
    )
    request = GatewayRequest.make("answer_equivalence", messages)
    equivalent = complete_yes_no(gateway, request, default=False, what="answer judge")
    return "match" if equivalent else "mismatch"


def eval_dataset(
    dataset_dir: str | Path,
    mode: str,
    *,
    gateway: Gateway,
    config: RunConfig,
    sandbox: SandboxClient | None = None,
) -> dict:
    """Run every instance and score it; failures score as incorrect."""
    if mode not in ("oracle", "exact", "model_judge"):
        raise ValueError(f"unknown eval mode: {mode!r}")
    instances = load_dataset(dataset_dir)
    results = []
    correct = 0
    for inst in instances:
        answer: str | None = None
        verdict = "run_error"
        try:
            engine = execute_run(
                inst.task,
                inst.instance,
                inst.plan,
                gateway=gateway,
                config=config,
                facts=inst.facts,
                sandbox=sandbox,
            )
            answer = final_answer(engine)
        except Exception as exc:  # noqa: BLE001 - a bad instance must not abort the sweep
            logger.warning("instance %s failed: %s", inst.id, exc)
        if answer is not None:
            if mode == "oracle":
                verdict = _score_oracle(answer, inst)
            elif mode == "exact":
                verdict = "match" if answer.strip() == inst.gold else "mismatch"
            else:
                verdict = _score_model_judge(gateway, answer, inst.gold)
        if verdict in ("valid", "match"):
            correct += 1
        results.append(
            {"id": inst.id, "verdict": verdict, "answer": answer, "gold": inst.gold}
        )
    count = len(instances)
    return {
        "mode": mode,
        "count": count,
        "correct": correct,
        "accuracy": (correct / count) if count else 0.0,
        "instances": results,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, ensure_ascii=False, indent=2) + "\n"
