/**
 * Executes one code artifact in a fresh Python process and working
 * directory, capturing stdout/stderr, the exit status, a structured
 * unhandled-exception report, and a wall-clock timeout.
 */

import { spawn } from "node:child_process";
import { mkdir, mkdtemp, readFile, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { SandboxException, SandboxRequest, SandboxResult } from "./protocol";

export const TIMEOUT_EXIT_STATUS = 124;

/** The host is unusable (interpreter missing); distinct from code failure. */
export class EnvironmentError extends Error {}

// The artifact itself never catches anything; this top-level harness turns
// the escaping exception into a machine-readable report while still writing
// the traceback to stderr and exiting nonzero, like an unhandled error.
const BOOTSTRAP = `import json
import runpy
import sys
import traceback

code_path, report_path = sys.argv[1], sys.argv[2]
try:
    runpy.run_path(code_path, run_name="__main__")
except SystemExit as exc:
    code = exc.code
    if code is None:
        sys.exit(0)
    sys.exit(code if isinstance(code, int) else 1)
except BaseException as exc:
    trace = traceback.format_exc()
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "type": type(exc).__name__,
                "message": str(exc),
                "traceback": trace,
            },
            fh,
        )
    sys.stderr.write(trace)
    sys.exit(1)
`;

export function pythonCommand(): string {
  return process.env.PYTHON ?? "python3";
}

export async function executeRequest(
  request: SandboxRequest
): Promise<SandboxResult> {
  const workdir =
    request.workdir ?? (await mkdtemp(join(tmpdir(), "codestep-")));
  await mkdir(workdir, { recursive: true });
  const codePath = join(workdir, "main.py");
  const bootstrapPath = join(workdir, "_bootstrap.py");
  const reportPath = join(workdir, "_exception.json");
  await writeFile(codePath, request.code, "utf-8");
  await writeFile(bootstrapPath, BOOTSTRAP, "utf-8");

  return new Promise<SandboxResult>((resolve, reject) => {
    const child = spawn(pythonCommand(), [bootstrapPath, codePath, reportPath], {
      cwd: workdir,
      stdio: ["ignore", "pipe", "pipe"],
    });

    let stdout = "";
    let stderr = "";
    let timedOut = false;

    const timer = setTimeout(() => {
      timedOut = true;
      child.kill("SIGKILL");
    }, request.timeout * 1000);

    child.stdout.on("data", (chunk) => {
      stdout += chunk;
    });
    child.stderr.on("data", (chunk) => {
      stderr += chunk;
    });
    child.on("error", (err: NodeJS.ErrnoException) => {
      clearTimeout(timer);
      if (err.code === "ENOENT") {
        reject(
          new EnvironmentError(
            `host interpreter not found: ${pythonCommand()}`
          )
        );
      } else {
        reject(new EnvironmentError(`failed to spawn interpreter: ${err}`));
      }
    });
    child.on("close", async (code) => {
      clearTimeout(timer);
      if (timedOut) {
        resolve({
          stdout,
          stderr,
          exit_status: TIMEOUT_EXIT_STATUS,
          exception: null,
          timed_out: true,
        });
        return;
      }
      const exitStatus = code ?? 1;
      let exception: SandboxException | null = null;
      if (exitStatus !== 0) {
        try {
          const report = JSON.parse(await readFile(reportPath, "utf-8"));
          exception = {
            type: String(report.type),
            message: String(report.message),
            traceback: String(report.traceback),
          };
        } catch {
          // no report: the process died without raising (e.g. os._exit)
        }
      }
      resolve({
        stdout,
        stderr,
        exit_status: exitStatus,
        exception,
        timed_out: false,
      });
    });
  });
}
