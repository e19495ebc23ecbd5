import { describe, expect, it } from "vitest";
import { SessionRunner, type CollectionApi, type TrialPresentation, type View } from "../src/session.js";
import type { Click, SessionInfo, SubmitOutcome } from "../src/types.js";

function makeSession(nTrials: number, required = 10): SessionInfo {
  return {
    session_id: "sess-1",
    image_size: 800,
    trials: Array.from({ length: nTrials }, (_, i) => ({
      trial_id: `trial-${i}`,
      pair_id: i,
      image_id: i,
      image_url: `/api/image/${i}`,
      target_class: i % 2 ? "red-square" : "blue-circle",
      required_clicks: required,
    })),
  };
}

class FakeApi implements CollectionApi {
  submissions: { trialId: string; clicks: Click[] }[] = [];
  outcomes: SubmitOutcome[] = [];
  pending: Array<(o: SubmitOutcome) => void> = [];

  constructor(private session: SessionInfo) {}

  async newSession(): Promise<SessionInfo> {
    return this.session;
  }

  imageUrl(p: string): string {
    return `http://svc${p}`;
  }

  async submit(_s: string, trialId: string, clicks: Click[]): Promise<SubmitOutcome> {
    this.submissions.push({ trialId, clicks });
    const queued = this.outcomes.shift();
    if (queued) return queued;
    return new Promise((resolve) => this.pending.push(resolve));
  }

  resolveNext(o: SubmitOutcome): void {
    const r = this.pending.shift();
    if (!r) throw new Error("no pending submission");
    r(o);
  }
}

class RecordingView implements View {
  trials: TrialPresentation[] = [];
  clicks: readonly Click[] = [];
  remaining = -1;
  submitEnabled = false;
  notices: string[] = [];
  completed: number | null = null;

  showTrial(p: TrialPresentation): void {
    this.trials.push(p);
  }
  updateClicks(clicks: readonly Click[], remaining: number): void {
    this.clicks = clicks;
    this.remaining = remaining;
  }
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

function clickTimes(runner: SessionRunner, n: number, offset = 0): void {
  for (let i = 0; i < n; i++) {
    runner.handleClick(offset + i * 3, offset + i * 5 + 1);
  }
}

async function setup(nTrials = 3, required = 10) {
  const api = new FakeApi(makeSession(nTrials, required));
  const view = new RecordingView();
  let t = 0;
  const runner = new SessionRunner(api, view, () => (t += 7));
  await runner.start();
  return { api, view, runner };
}

describe("SessionRunner", () => {
  it("presents the first trial with prompt, progress, and absolute image url", async () => {
    const { view } = await setup(20);
    expect(view.trials).toHaveLength(1);
    const p = view.trials[0]!;
    expect(p.prompt).toBe("Where would you put this blue-circle?");
    expect(p.index).toBe(0);
    expect(p.total).toBe(20);
    expect(p.imageUrl).toBe("http://svc/api/image/0");
    expect(view.submitEnabled).toBe(false);
  });

  it("enables submit only at exactly the required count", async () => {
    const { view, runner } = await setup();
    clickTimes(runner, 9);
    expect(view.submitEnabled).toBe(false);
    runner.handleClick(700, 700);
    expect(view.submitEnabled).toBe(true);
    runner.handleUndo();
    expect(view.submitEnabled).toBe(false);
  });

  it("ignores a duplicate click and posts a visible notice", async () => {
    const { view, runner } = await setup();
    runner.handleClick(10, 10);
    runner.handleClick(10, 10);
    expect(view.clicks).toHaveLength(1);
    expect(view.notices.at(-1)).toMatch(/already marked/);
  });

  it("submit before the trial is complete does nothing", async () => {
    const { api, view, runner } = await setup();
    clickTimes(runner, 9);
    await runner.handleSubmit();
    expect(api.submissions).toHaveLength(0);
    expect(view.trials).toHaveLength(1);
  });

  it("advances through all trials and shows the completion screen", async () => {
    const { api, view, runner } = await setup(3);
    for (let t = 0; t < 3; t++) {
      api.outcomes.push({ kind: "ok", remaining: 2 - t });
      clickTimes(runner, 10, t);
      await runner.handleSubmit();
    }
    expect(api.submissions.map((s) => s.trialId)).toEqual(["trial-0", "trial-1", "trial-2"]);
    expect(view.trials).toHaveLength(3);
    expect(runner.finished).toBe(true);
    expect(view.completed).toBe(3);
  });

  it("sends image-pixel coordinates with per-trial timestamps", async () => {
    const { api, runner } = await setup(1);
    api.outcomes.push({ kind: "ok", remaining: 0 });
    clickTimes(runner, 10);
    await runner.handleSubmit();
    const clicks = api.submissions[0]!.clicks;
    expect(clicks).toHaveLength(10);
    for (const c of clicks) {
      expect(Number.isInteger(c.x)).toBe(true);
      expect(Number.isInteger(c.y)).toBe(true);
      expect(c.t_ms).toBeGreaterThanOrEqual(0);
    }
    const coords = new Set(clicks.map((c) => `${c.x},${c.y}`));
    expect(coords.size).toBe(10);
  });

  it("maps display clicks through the element rect", async () => {
    const { view, runner } = await setup();
    runner.handleDisplayClick(55, 75, { left: 50, top: 70, width: 800, height: 800 });
    expect(view.clicks).toEqual([expect.objectContaining({ x: 5, y: 5 })]);
    runner.handleDisplayClick(10, 10, { left: 50, top: 70, width: 800, height: 800 });
    expect(view.clicks).toHaveLength(1);
    expect(view.notices.at(-1)).toMatch(/outside the image/);
  });

  it("keeps clicks and allows correction after a server rejection", async () => {
    const { api, view, runner } = await setup(2);
    clickTimes(runner, 10);
    api.outcomes.push({ kind: "violations", violations: ["clicks must be distinct"] });
    await runner.handleSubmit();
    expect(view.notices.at(-1)).toMatch(/clicks must be distinct/);
    expect(view.trials).toHaveLength(1);
    expect(runner.clickCount).toBe(10);
    runner.handleUndo();
    runner.handleClick(650, 650);
    api.outcomes.push({ kind: "ok", remaining: 1 });
    await runner.handleSubmit();
    expect(view.trials).toHaveLength(2);
  });

  it("treats an already-submitted trial as done and advances", async () => {
    const { view, runner, api } = await setup(2);
    clickTimes(runner, 10);
    api.outcomes.push({ kind: "already_submitted" });
    await runner.handleSubmit();
    expect(view.notices.at(-1)).toMatch(/already recorded/);
    expect(view.trials).toHaveLength(2);
  });

  it("surfaces network failure, keeps clicks, and re-enables submit", async () => {
    const session = makeSession(1);
    const api = new FakeApi(session);
    api.submit = async () => {
      throw new TypeError("socket hang up");
    };
    const view = new RecordingView();
    const runner = new SessionRunner(api, view);
    await runner.start();
    clickTimes(runner, 10);
    await runner.handleSubmit();
    expect(view.notices.at(-1)).toMatch(/Network problem/);
    expect(runner.clickCount).toBe(10);
    expect(view.submitEnabled).toBe(true);
  });

  it("allows only one submission in flight", async () => {
    const { api, view, runner } = await setup(1);
    clickTimes(runner, 10);
    const first = runner.handleSubmit();
    const second = runner.handleSubmit();
    expect(api.submissions).toHaveLength(1);
    expect(view.submitEnabled).toBe(false);
    api.resolveNext({ kind: "ok", remaining: 0 });
    await Promise.all([first, second]);
    expect(api.submissions).toHaveLength(1);
    expect(runner.finished).toBe(true);
  });

  it("ignores clicks while a submission is in flight", async () => {
    const { api, runner, view } = await setup(2);
    clickTimes(runner, 10);
    const inflight = runner.handleSubmit();
    runner.handleClick(777, 777);
    expect(api.submissions[0]!.clicks).toHaveLength(10);
    api.resolveNext({ kind: "ok", remaining: 1 });
    await inflight;
    expect(view.trials).toHaveLength(2);
  });

  it("shows an empty completion screen when no trials are available", async () => {
    const { view, runner } = await setup(0);
    expect(runner.finished).toBe(true);
    expect(view.completed).toBe(0);
  });
});
