// Spins up the real play server around a freshly trained grounded sender.
// The run directory is cached between test runs to keep iteration fast.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { existsSync, mkdirSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

const FIXTURE_DIR = join(tmpdir(), "refgame-webui-fixture");
const URL_FILE = join(process.cwd(), "test", "fixtures", "server_url.txt");

let server: ChildProcess | null = null;

function trainFixture(): void {
  if (existsSync(join(FIXTURE_DIR, "checkpoint.json"))) return;
  mkdirSync(FIXTURE_DIR, { recursive: true });
  const args = [
    "-m", "refgame.cli", "train",
    "--out", FIXTURE_DIR,
    "--grounding",
    "--set", "world.n_categories=4",
    "--set", "world.concepts_per_category=3",
    "--set", "world.instances_per_concept=5",
    "--set", "world.feature_dim=16",
    "--set", "world.seed=21",
    "--set", "train.vocab_size=12",
    "--set", "train.embed_dim=20",
    "--set", "train.n_filters=8",
    "--set", "train.n_iterations=8000",
    "--set", "train.seed=5",
  ];
  const res = spawnSync("python3", args, { stdio: "pipe", timeout: 150_000 });
  if (res.status !== 0) {
    rmSync(FIXTURE_DIR, { recursive: true, force: true });
    throw new Error(`fixture training failed: ${res.stderr?.toString()}`);
  }
}

function startServer(): Promise<string> {
  return new Promise((resolve, reject) => {
    server = spawn("python3", [
      "-m", "refgame.cli", "serve",
      "--out", FIXTURE_DIR,
      "--port", "0",
      "--expose-target",
    ]);
    let buffer = "";
    const onData = (chunk: Buffer) => {
      buffer += chunk.toString();
      const m = buffer.match(/http:\/\/([\d.]+):(\d+)\/v1/);
      if (m) {
        server?.stdout?.off("data", onData);
        resolve(`http://${m[1]}:${m[2]}`);
      }
    };
    server.stdout?.on("data", onData);
    server.stderr?.on("data", (c: Buffer) => {
      buffer += c.toString();
    });
    server.on("exit", (code) => reject(new Error(`server exited early (${code}): ${buffer}`)));
    setTimeout(() => reject(new Error(`server did not report a port: ${buffer}`)), 30_000);
  });
}

export default async function setup(): Promise<() => void> {
  trainFixture();
  const url = await startServer();
  writeFileSync(URL_FILE, url);
  return () => {
    server?.kill("SIGKILL");
  };
}
