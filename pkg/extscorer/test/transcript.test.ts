import { spawn, spawnSync } from "node:child_process";
import { readFileSync } from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

const ROOT = path.dirname(path.dirname(fileURLToPath(import.meta.url)));
const SERVER = path.join(ROOT, "dist", "cli.js");
const MODEL = path.join(ROOT, "fixtures", "model.json");

interface Run {
  code: number | null;
  stdout: string;
  stderr: string;
}

function runServer(args: string[], input: string): Promise<Run> {
  return new Promise((resolve, reject) => {
    const child = spawn("node", args, { stdio: ["pipe", "pipe", "pipe"] });
    let stdout = "";
    let stderr = "";
    child.stdout.on("data", (chunk) => (stdout += chunk));
    child.stderr.on("data", (chunk) => (stderr += chunk));
    child.on("error", reject);
    child.on("close", (code) => resolve({ code, stdout, stderr }));
    child.stdin.write(input);
    child.stdin.end();
  });
}

describe("transcript replay", () => {
  it("reproduces the committed golden transcript byte for byte", async () => {
    const requests = readFileSync(path.join(ROOT, "fixtures", "requests.ndjson"), "utf-8");
    const golden = readFileSync(path.join(ROOT, "fixtures", "responses.ndjson"), "utf-8");
    const run = await runServer([SERVER, "--model", MODEL], requests);
    expect(run.code).toBe(0);
    expect(run.stdout).toBe(golden);
  });

  it("writes a session summary to stderr with --stats", async () => {
    const script =
      '{"id": 1, "op": "ping"}\n{"id": 2, "op": "logprob", "text": ["rain", "fell"]}\n';
    const run = await runServer([SERVER, "--model", MODEL, "--stats"], script);
    expect(run.code).toBe(0);
    expect(run.stderr).toContain("requests=2");
    expect(run.stderr).toContain("tokens=2");
    expect(run.stderr).toContain("device=cpu");
  });
});

describe("command line", () => {
  it("exits 2 without --model", async () => {
    const run = await runServer([SERVER], "");
    expect(run.code).toBe(2);
    expect(run.stderr).toContain("usage:");
  });

  it("exits 2 on an unknown flag", async () => {
    const run = await runServer([SERVER, "--model", MODEL, "--frob"], "");
    expect(run.code).toBe(2);
  });

  it("exits 1 when the model file cannot be loaded", async () => {
    const run = await runServer([SERVER, "--model", path.join(ROOT, "missing.json")], "");
    expect(run.code).toBe(1);
    expect(run.stderr).toContain("cannot read model file");
  });
});

const pythonReady =
  spawnSync("python3", ["-c", "import lfnsum"], { timeout: 30000 }).status === 0;

describe.skipIf(!pythonReady)("pipeline client integration", () => {
  it("serves the pipeline's own scorer client with native-equal scores", async () => {
    const driver = path.join(ROOT, "test", "driver.py");
    const result = await new Promise<Run>((resolve, reject) => {
      const child = spawn("python3", [driver, MODEL, SERVER], {
        stdio: ["ignore", "pipe", "pipe"],
      });
      let stdout = "";
      let stderr = "";
      child.stdout.on("data", (chunk) => (stdout += chunk));
      child.stderr.on("data", (chunk) => (stderr += chunk));
      child.on("error", reject);
      child.on("close", (code) => resolve({ code, stdout, stderr }));
    });
    expect(result.code, result.stderr).toBe(0);
    const pairs: { external: number; native: number }[] = JSON.parse(result.stdout);
    expect(pairs.length).toBeGreaterThan(5);
    for (const pair of pairs) {
      expect(Math.abs(pair.external - pair.native)).toBeLessThanOrEqual(1e-6);
    }
  });
});
