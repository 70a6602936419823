"""Client side of the generated-code runner.

The engine never runs generated code in-process. It hands the code to a
runner process over a one-shot JSON protocol: the request goes to the
runner's stdin, the structured result comes back on its stdout. A crashed
runner (nonzero exit, empty stdout) is an environment problem and is kept
distinct from a failure inside the executed code, which arrives as a
well-formed result carrying the exception.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
from dataclasses import dataclass, field
from typing import Protocol

GRACE_SECONDS = 10.0


class SandboxError(RuntimeError):
    """Runner crashed, replied garbage, or the environment is unusable."""


@dataclass(frozen=True)
class SandboxRequest:
    code: str
    timeout: float
    workdir: str | None = None

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class SandboxException:
    type: str
    message: str
    traceback: str


@dataclass(frozen=True)
class SandboxResult:
    stdout: str
    stderr: str
    exit_status: int
    exception: SandboxException | None = None
    timed_out: bool = False

    @property
    def ok(self) -> bool:
        return self.exit_status == 0 and not self.timed_out and self.exception is None

    def failure_summary(self) -> str:
        if self.timed_out:
            return "execution timed out"
        if self.exception is not None:
            return (
                f"unhandled {self.exception.type}: {self.exception.message}\n"
                f"{self.exception.traceback}"
            )
        return f"exited with status {self.exit_status}: {self.stderr.strip()}"


def result_from_dict(obj: dict) -> SandboxResult:
    exc = obj.get("exception")
    return SandboxResult(
        stdout=obj["stdout"],
        stderr=obj["stderr"],
        exit_status=obj["exit_status"],
        exception=(
            SandboxException(
                type=exc["type"], message=exc["message"], traceback=exc["traceback"]
            )
            if exc
            else None
        ),
        timed_out=obj["timed_out"],
    )


class SandboxClient(Protocol):
    def execute(self, request: SandboxRequest) -> SandboxResult: ...


class SubprocessSandbox:
    """Spawns the runner command once per request (JSON in, JSON out)."""

    def __init__(self, cmd: list[str]):
        if not cmd:
            raise ValueError("runner command is empty")
        self.cmd = list(cmd)

    def execute(self, request: SandboxRequest) -> SandboxResult:
        workdir = request.workdir or tempfile.mkdtemp(prefix="codestep-")
        payload = json.dumps(
            {"code": request.code, "timeout": request.timeout, "workdir": workdir}
        )
        try:
            proc = subprocess.run(
                self.cmd,
                input=payload,
                capture_output=True,
                text=True,
                timeout=request.timeout + GRACE_SECONDS,
            )
        except FileNotFoundError as exc:
            raise SandboxError(f"runner command not found: {self.cmd[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SandboxError("runner did not reply within the grace period") from exc
        if not proc.stdout.strip():
            raise SandboxError(
                f"runner crashed (exit {proc.returncode}): {proc.stderr.strip()}"
            )
        try:
            obj = json.loads(proc.stdout)
            return result_from_dict(obj)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SandboxError(f"runner reply was not a valid result: {exc}") from exc


@dataclass
class FakeSandbox:
    """Scripted stand-in used by the test suite; no process is spawned.

    Results are served from ``script`` in order; when the script is empty,
    ``handler`` (if set) is consulted. Every request is recorded.
    """

    script: list[SandboxResult] = field(default_factory=list)
    handler: object = None
    requests: list[SandboxRequest] = field(default_factory=list)

    def execute(self, request: SandboxRequest) -> SandboxResult:
        self.requests.append(request)
        if self.script:
            return self.script.pop(0)
        if self.handler is not None:
            return self.handler(request)  # type: ignore[operator]
        raise AssertionError("FakeSandbox has no scripted result for this request")


def ok_result(stdout: str) -> SandboxResult:
    return SandboxResult(stdout=stdout, stderr="", exit_status=0)


def error_result(exc_type: str, message: str, traceback_text: str = "") -> SandboxResult:
    return SandboxResult(
        stdout="",
        stderr=traceback_text,
        exit_status=1,
        exception=SandboxException(
            type=exc_type, message=message, traceback=traceback_text
        ),
    )
