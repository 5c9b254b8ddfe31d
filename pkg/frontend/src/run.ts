import { execFile } from "node:child_process";

/** Error raised when the CLI exits nonzero or cannot be spawned.
 *
 * `exitCode` follows the CLI's convention: 1 for runtime/data problems
 * (missing files, malformed models, rejected samples), 2 for usage errors
 * (bad flags, unknown variables or states). Spawn failures use -1.
 */
export class PgmkitError extends Error {
  readonly exitCode: number;
  readonly stderr: string;

  constructor(message: string, exitCode: number, stderr: string) {
    super(message);
    this.name = "PgmkitError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

/** Resolve the CLI binary: $PGMKIT_BIN if set, else `pgmkit` on PATH. */
export function pgmkitBinary(): string {
  return process.env.PGMKIT_BIN || "pgmkit";
}

function messageFrom(stderr: string, args: string[], code: number): string {
  // The CLI reports failures as a final "error: ..." line on stderr.
  const lines = stderr.trim().split("\n");
  for (let i = lines.length - 1; i >= 0; i--) {
    const line = lines[i]!.trim();
    if (line.startsWith("error:") || line.includes(": error:")) return line;
  }
  const tail = lines[lines.length - 1];
  if (tail) return tail;
  return `pgmkit ${args[0] ?? ""} exited with code ${code}`;
}

/** Run the CLI with the given argv and capture its output. */
export function run(args: string[]): Promise<{ stdout: string; stderr: string }> {
  const bin = pgmkitBinary();
  return new Promise((resolve, reject) => {
    execFile(bin, args, { maxBuffer: 64 * 1024 * 1024 }, (err, stdout, stderr) => {
      if (!err) {
        resolve({ stdout, stderr });
        return;
      }
      const code = (err as NodeJS.ErrnoException).code;
      if (code === "ENOENT") {
        reject(
          new PgmkitError(
            `cannot find the pgmkit binary at "${bin}" (install the CLI or set PGMKIT_BIN)`,
            -1,
            stderr,
          ),
        );
        return;
      }
      const exitCode = typeof code === "number" ? code : -1;
      reject(new PgmkitError(messageFrom(stderr, args, exitCode), exitCode, stderr));
    });
  });
}

/** Run the CLI and parse its stdout as a JSON document. */
export async function runJson<T>(args: string[]): Promise<T> {
  const { stdout } = await run(args);
  return JSON.parse(stdout) as T;
}
