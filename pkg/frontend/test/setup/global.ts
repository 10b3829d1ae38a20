/**
 * Spawns a real triage service on a synthetic archive for the contract
 * tests. The base URL is written to test/.service.json; teardown kills
 * the server and removes the working directory.
 */

import { execFileSync, spawn } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import fs from "node:fs";
import net from "node:net";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURE_SCRIPT = `
import sys
from pathlib import Path
from rxtriage.cli import main
from rxtriage.synthetic import make_archive

root = Path(sys.argv[1])
archive = make_archive(root / "archive", n_sequences=6, width=24, height=18,
                       seed=4242, anomaly_index=1)
assert main(["fit", "--manifest", str(archive.manifest_path),
             "--out", str(root / "model.json")]) == 0
assert main(["score", "--model", str(root / "model.json"),
             "--manifest", str(archive.manifest_path),
             "--scores-out", str(root / "scores.jsonl")]) == 0
print(archive.anomaly_sequence_id)
`;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("could not allocate a port"));
        return;
      }
      srv.close(() => resolve(addr.port));
    });
    srv.on("error", reject);
  });
}

async function waitReady(url: string, proc: ChildProcess, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited early with code ${proc.exitCode}`);
    }
    try {
      const resp = await fetch(url);
      if (resp.ok) return;
    } catch {
      // not listening yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error(`service did not become ready at ${url}`);
}

export default async function setup(): Promise<() => void> {
  const work = fs.mkdtempSync(path.join(os.tmpdir(), "rxdash-"));
  const anomalyId = execFileSync("python3", ["-c", FIXTURE_SCRIPT, work], {
    encoding: "utf8",
  }).trim().split("\n").pop()!;

  const port = await freePort();
  const proc = spawn(
    "python3",
    [
      "-m",
      "rxtriage.cli",
      "serve",
      "--model",
      path.join(work, "model.json"),
      "--manifest",
      path.join(work, "archive", "manifest.jsonl"),
      "--scores",
      path.join(work, "scores.jsonl"),
      "--port",
      String(port),
    ],
    { stdio: "ignore" },
  );

  const base = `http://127.0.0.1:${port}`;
  await waitReady(`${base}/api/model`, proc, 20000);

  const infoPath = fileURLToPath(new URL("../.service.json", import.meta.url));
  fs.writeFileSync(infoPath, JSON.stringify({ base, anomalyId }));

  return () => {
    proc.kill();
    fs.rmSync(work, { recursive: true, force: true });
    fs.rmSync(infoPath, { force: true });
  };
}
