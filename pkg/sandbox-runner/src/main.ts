/**
 * Entry point: read one request from stdin, execute it, print one result.
 *
 * Exit codes: 0 result written (even if the code inside failed);
 * 2 unusable request or environment, with nothing on stdout.
 */

import { EnvironmentError, executeRequest } from "./runner";
import { parseRequest } from "./protocol";

async function readStdin(): Promise<string> {
  const chunks: Buffer[] = [];
  for await (const chunk of process.stdin) {
    chunks.push(Buffer.from(chunk));
  }
  return Buffer.concat(chunks).toString("utf-8");
}

async function main(): Promise<number> {
  let raw: string;
  try {
    raw = await readStdin();
  } catch (err) {
    process.stderr.write(`failed to read request: ${err}\n`);
    return 2;
  }
  try {
    const request = parseRequest(raw);
    const result = await executeRequest(request);
    process.stdout.write(JSON.stringify(result) + "\n");
    return 0;
  } catch (err) {
    if (err instanceof EnvironmentError) {
      process.stderr.write(`${err.message}\n`);
    } else {
      process.stderr.write(`invalid request: ${err}\n`);
    }
    return 2;
  }
}

main().then((code) => {
  process.exitCode = code;
});
