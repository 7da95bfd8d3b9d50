/** Spawn the real backend on a fixture store for the contract tests. */
import { type ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

const PORT = 8972;
export const BASE_URL = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | undefined;
let workDir: string | undefined;

async function waitForReady(url: string, tries = 100): Promise<void> {
  for (let i = 0; i < tries; i++) {
    try {
      const response = await fetch(`${url}/api/plants`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("fixture server never became ready");
}

export async function setup(): Promise<void> {
  workDir = mkdtempSync(join(tmpdir(), "hydrodispatch-ui-"));
  const db = join(workDir, "fixture.db");
  const models = join(workDir, "models");

  const cli = (...args: string[]) =>
    execFileSync("python3", ["-m", "hydrodispatch.cli", ...args], {
      stdio: "pipe",
    });

  cli("synth", "--seed", "42", "--hours", "4000", "--lag", "2", "--db", db);
  cli("train", "--db", db, "--plant", "UP", "--seed", "42", "--epochs", "40",
      "--out", join(workDir, "up.json"));
  // persist model files directly where the service looks
  execFileSync("python3", ["-c", `
import pathlib, shutil
models = pathlib.Path(${JSON.stringify(models)})
models.mkdir(parents=True, exist_ok=True)
shutil.move(${JSON.stringify(join(workDir, "up.json"))}, models / "UP.json")
from hydrodispatch.datastore import Store
from hydrodispatch.mlp import TrainConfig
from hydrodispatch.unitdispatch import save_model, train_plant_model
model = train_plant_model(Store(${JSON.stringify(db)}), "DOWN",
                          TrainConfig(seed=42, epochs=30))
save_model(model, models / "DOWN.json")
`]);

  server = spawn("python3", ["-m", "hydrodispatch.cli", "serve", "--db", db,
                             "--models-dir", models, "--port", String(PORT)],
                 { stdio: "ignore" });
  await waitForReady(BASE_URL);
  process.env.FIXTURE_BASE_URL = BASE_URL;
}

export async function teardown(): Promise<void> {
  server?.kill();
  if (workDir) rmSync(workDir, { recursive: true, force: true });
}
