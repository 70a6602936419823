/**
 * Wire types. One request arrives as JSON on stdin; exactly one result
 * leaves as JSON on stdout. A nonzero runner exit with empty stdout means
 * the runner itself failed (environment problem), which callers must keep
 * distinct from a failure inside the executed code.
 */

export interface SandboxRequest {
  code: string;
  timeout: number; // seconds of wall clock granted to the code
  workdir?: string; // fresh directory to run in; created when absent
}

export interface SandboxException {
  type: string;
  message: string;
  traceback: string;
}

export interface SandboxResult {
  stdout: string;
  stderr: string;
  exit_status: number;
  exception: SandboxException | null;
  timed_out: boolean;
}

export function parseRequest(raw: string): SandboxRequest {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch (err) {
    throw new Error(`request is not valid JSON: ${String(err)}`);
  }
  if (typeof obj !== "object" || obj === null) {
    throw new Error("request must be a JSON object");
  }
  const req = obj as Record<string, unknown>;
  if (typeof req.code !== "string") {
    throw new Error("request.code must be a string");
  }
  if (typeof req.timeout !== "number" || !(req.timeout > 0)) {
    throw new Error("request.timeout must be a positive number");
  }
  if (req.workdir !== undefined && typeof req.workdir !== "string") {
    throw new Error("request.workdir must be a string when present");
  }
  return {
    code: req.code,
    timeout: req.timeout,
    workdir: req.workdir as string | undefined,
  };
}
