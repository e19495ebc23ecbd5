// End-to-end run against the real collection service: three scripted
// sessions exhaust a 20-pair pool, then the click logs feed the map
// pipeline. Needs python3 with the backend package installed.
import { spawn, execFileSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { SessionRunner, type TrialPresentation, type View } from "../src/session.js";
import type { Click, SessionInfo } from "../src/types.js";

const PY = process.env.PYTHON ?? "python3";
const IMAGE_SIZE = 800;
const REQUIRED = 10;
const TRIALS = 20;

let workRoot: string;
let server: ChildProcess;
let baseUrl: string;
let api: ApiClient;

function logLines(): string[] {
  const p = join(workRoot, "collection", "clicks.jsonl");
  try {
    return readFileSync(p, "utf-8").split("\n").filter((l) => l.trim() !== "");
  } catch {
    return [];
  }
}

/** Distinct in-bounds integer clicks, varying by trial and session. */
function scriptedClicks(trialIndex: number, salt: number): Click[] {
  const clicks: Click[] = [];
  for (let i = 0; i < REQUIRED; i++) {
    clicks.push({
      x: 20 + 77 * i + trialIndex,
      y: 30 + 53 * i + 11 * salt,
      t_ms: 100 * (i + 1),
    });
  }
  return clicks;
}

class ScriptedView implements View {
  trials: TrialPresentation[] = [];
  submitEnabled = false;
  notices: string[] = [];
  completed: number | null = null;

  showTrial(p: TrialPresentation): void {
    this.trials.push(p);
  }
  updateClicks(): void {}
  setSubmitEnabled(enabled: boolean): void {
    this.submitEnabled = enabled;
  }
  notify(message: string): void {
    this.notices.push(message);
  }
  clearNotice(): void {}
  showComplete(completed: number): void {
    this.completed = completed;
  }
}

async function runScriptedSession(salt: number): Promise<ScriptedView> {
  const view = new ScriptedView();
  const runner = new SessionRunner(api, view);
  await runner.start();
  let guard = 0;
  while (!runner.finished) {
    if (++guard > TRIALS + 1) throw new Error("session did not terminate");
    const trialIndex = view.trials.length - 1;
    for (const c of scriptedClicks(trialIndex, salt)) {
      runner.handleClick(c.x, c.y);
    }
    expect(view.submitEnabled).toBe(true);
    await runner.handleSubmit();
  }
  return view;
}

beforeAll(async () => {
  workRoot = mkdtempSync(join(tmpdir(), "clickui-e2e-"));
  const out = join(workRoot, "out");
  execFileSync(
    PY,
    [
      "-m", "seco", "synth-gen",
      "--set", `run.out_dir=${out}`,
      "--set", "synthworld.canvas=64",
      "--set", "synthworld.margin=2",
      "--set", "synthworld.objects_per_scene=[1, 2]",
      "--set", "synthworld.object_size=[12, 24]",
      "--set", "synthworld.n_train=4",
      "--set", "synthworld.n_test=10",
      "--out", join(workRoot, "dataset"),
    ],
    { stdio: "pipe" },
  );

  server = spawn(
    PY,
    [
      "-m", "seco", "serve-collection",
      "--port", "0",
      "--workdir", join(workRoot, "collection"),
      "--dataset-build", join(workRoot, "dataset", "test"),
      "--set", `run.out_dir=${out}`,
      "--set", "collection.pairs_per_image=2",
    ],
    { env: { ...process.env, PYTHONUNBUFFERED: "1" }, stdio: ["ignore", "pipe", "pipe"] },
  );
  let stdout = "";
  let stderr = "";
  server.stdout!.on("data", (d) => (stdout += String(d)));
  server.stderr!.on("data", (d) => (stderr += String(d)));
  baseUrl = await new Promise<string>((resolve, reject) => {
    const deadline = Date.now() + 60_000;
    const poll = setInterval(() => {
      const m = stdout.match(/serving on (http:\/\/127\.0\.0\.1:\d+)/);
      if (m) {
        clearInterval(poll);
        resolve(m[1]!);
      } else if (server.exitCode !== null || Date.now() > deadline) {
        clearInterval(poll);
        reject(new Error(`service did not come up:\n${stdout}\n${stderr}`));
      }
    }, 100);
  });
  api = new ApiClient(baseUrl);
  expect(await api.health()).toBe(true);
});

afterAll(() => {
  if (server && server.exitCode === null) server.kill("SIGTERM");
  if (workRoot && !process.env.E2E_KEEP) rmSync(workRoot, { recursive: true, force: true });
});

describe("collection end to end", () => {
  it("a scripted session completes all 20 trials and logs valid lines", async () => {
    const view = await runScriptedSession(0);
    expect(view.trials).toHaveLength(TRIALS);
    expect(view.completed).toBe(TRIALS);
    expect(view.trials.map((t) => t.prompt)).toContainEqual(
      expect.stringMatching(/^Where would you put this /),
    );

    const lines = logLines();
    expect(lines).toHaveLength(TRIALS);
    for (const line of lines) {
      const rec = JSON.parse(line);
      expect(rec.image_size).toEqual([IMAGE_SIZE, IMAGE_SIZE]);
      expect(typeof rec.image_id).toBe("number");
      expect(typeof rec.target_class).toBe("string");
      expect(rec.clicks).toHaveLength(REQUIRED);
      const seen = new Set<string>();
      for (const c of rec.clicks as Click[]) {
        expect(Number.isInteger(c.x)).toBe(true);
        expect(Number.isInteger(c.y)).toBe(true);
        expect(Number.isInteger(c.t_ms)).toBe(true);
        expect(c.x).toBeGreaterThanOrEqual(0);
        expect(c.x).toBeLessThan(IMAGE_SIZE);
        expect(c.y).toBeGreaterThanOrEqual(0);
        expect(c.y).toBeLessThan(IMAGE_SIZE);
        seen.add(`${c.x},${c.y}`);
      }
      expect(seen.size).toBe(REQUIRED);
    }
  }, 120_000);

  it("serves the stimulus images as PNG", async () => {
    const session = (await fetch(`${baseUrl}/api/session`).then((r) => r.json())) as SessionInfo;
    // sessions are free until submission, so peeking does not consume the pool
    const buf = new Uint8Array(await api.fetchImage(session.trials[0]!.image_url));
    expect([...buf.slice(0, 4)]).toEqual([0x89, 0x50, 0x4e, 0x47]);
  });

  it("forcing a nine-click submit past the client returns 422", async () => {
    const session = await api.newSession();
    const trial = session.trials[0]!;
    const nine = scriptedClicks(0, 1).slice(0, 9);
    const rejected = await api.submit(session.session_id, trial.trial_id, nine);
    expect(rejected.kind).toBe("violations");
    expect(JSON.stringify(rejected)).toMatch(/10/);
    expect(logLines()).toHaveLength(TRIALS);

    // same trial still accepts a corrected, complete response
    const ok = await api.submit(session.session_id, trial.trial_id, scriptedClicks(0, 1));
    expect(ok).toEqual({ kind: "ok", remaining: TRIALS - 1 });

    for (let k = 1; k < TRIALS; k++) {
      const out = await api.submit(
        session.session_id,
        session.trials[k]!.trial_id,
        scriptedClicks(k, 1),
      );
      expect(out).toEqual({ kind: "ok", remaining: TRIALS - 1 - k });
    }
    expect(logLines()).toHaveLength(2 * TRIALS);
  }, 120_000);

  it("a nine-click submit is impossible through the client", async () => {
    const view = new ScriptedView();
    const runner = new SessionRunner(api, view);
    await runner.start();

    const before = logLines().length;
    for (const c of scriptedClicks(0, 2).slice(0, 9)) {
      runner.handleClick(c.x, c.y);
    }
    expect(view.submitEnabled).toBe(false);
    await runner.handleSubmit();
    expect(view.trials).toHaveLength(1);
    expect(logLines()).toHaveLength(before);

    const tenth = scriptedClicks(0, 2)[9]!;
    runner.handleClick(tenth.x, tenth.y);
    await runner.handleSubmit();
    expect(view.trials).toHaveLength(2);

    let guard = 0;
    while (!runner.finished) {
      if (++guard > TRIALS + 1) throw new Error("session did not terminate");
      const trialIndex = view.trials.length - 1;
      for (const c of scriptedClicks(trialIndex, 2)) {
        runner.handleClick(c.x, c.y);
      }
      await runner.handleSubmit();
    }
    expect(view.completed).toBe(TRIALS);
    expect(logLines()).toHaveLength(3 * TRIALS);
  }, 120_000);

  it("no further sessions once every pair has three completions", async () => {
    await expect(api.newSession()).rejects.toThrow(/completed/);
  });

  it("process-clicks reproduces the map pipeline output for the logs", () => {
    const mapsDir = join(workRoot, "maps");
    execFileSync(
      PY,
      [
        "-m", "seco", "process-clicks",
        "--set", `run.out_dir=${join(workRoot, "out")}`,
        "--log", join(workRoot, "collection", "clicks.jsonl"),
        "--out", mapsDir,
      ],
      { stdio: "pipe" },
    );

    const agreement = JSON.parse(readFileSync(join(mapsDir, "agreement.json"), "utf-8"));
    expect(Object.keys(agreement)).toHaveLength(TRIALS);
    for (const value of Object.values(agreement)) {
      expect(Number.isFinite(value)).toBe(true);
    }

    const check = `
import json, sys
from collections import defaultdict
from pathlib import Path
import numpy as np
from seco import blobio
from seco.config import default_config, humanmap_config
from seco.humanmaps import clicks_to_map, read_click_logs

log_path, maps_dir = sys.argv[1], Path(sys.argv[2])
logs = read_click_logs(log_path)
groups = defaultdict(list)
for log in logs:
    groups[(log.image_id, log.target_class)].append(log)
assert len(groups) == ${TRIALS}, len(groups)
hcfg = humanmap_config(default_config())
checked = 0
for (image_id, cls), group in sorted(groups.items()):
    assert len(group) == 3, (image_id, cls, len(group))
    assert len({g.subject_id for g in group}) == 3
    assert sum(len(g.clicks) for g in group) == 30
    expected = clicks_to_map(group, hcfg).astype(np.float32)
    got = blobio.read_blob(maps_dir / f"human_{image_id:08d}_{cls}.bin")
    assert got.shape == (224, 224), got.shape
    assert np.array_equal(got, expected), (image_id, cls)
    checked += 1
print(f"MATCH {checked}")
`;
    const out = execFileSync(
      PY,
      ["-c", check, join(workRoot, "collection", "clicks.jsonl"), mapsDir],
      { stdio: "pipe" },
    ).toString();
    expect(out).toContain(`MATCH ${TRIALS}`);
  }, 120_000);
});
