import { displayToImage, type DisplayRect } from "./coords.js";
import { TrialClicks } from "./trial.js";
import type { Click, SessionInfo, SubmitOutcome, TrialInfo } from "./types.js";

/** The slice of the service client the runner needs. */
export interface CollectionApi {
  newSession(): Promise<SessionInfo>;
  imageUrl(imagePath: string): string;
  submit(sessionId: string, trialId: string, clicks: Click[]): Promise<SubmitOutcome>;
}

export interface TrialPresentation {
  index: number;
  total: number;
  prompt: string;
  imageUrl: string;
  targetClass: string;
  required: number;
}

/** Everything the runner needs from the page; kept abstract for tests. */
export interface View {
  showTrial(p: TrialPresentation): void;
  updateClicks(clicks: readonly Click[], remaining: number): void;
  setSubmitEnabled(enabled: boolean): void;
  notify(message: string): void;
  clearNotice(): void;
  showComplete(completed: number): void;
}

/**
 * Drives one collection session trial by trial.
 *
 * The runner owns all client-side rules: duplicate clicks never enter
 * the buffer, submission is possible only with the exact required count,
 * and at most one submission is in flight at a time. Server rejections
 * surface through the view and leave the recorded clicks intact so the
 * subject can correct with undo.
 */
export class SessionRunner {
  private session: SessionInfo | null = null;
  private index = 0;
  private trial: TrialClicks | null = null;
  private trialStart = 0;
  private inFlight = false;
  private done = false;

  constructor(
    private api: CollectionApi,
    private view: View,
    private now: () => number = () => Date.now(),
  ) {}

  get finished(): boolean {
    return this.done;
  }

  get sessionId(): string {
    if (!this.session) throw new Error("session not started");
    return this.session.session_id;
  }

  get currentTrial(): TrialInfo {
    if (!this.session) throw new Error("session not started");
    const t = this.session.trials[this.index];
    if (!t) throw new Error(`no trial at index ${this.index}`);
    return t;
  }

  get clickCount(): number {
    return this.trial ? this.trial.count : 0;
  }

  async start(): Promise<void> {
    this.session = await this.api.newSession();
    if (this.session.trials.length === 0) {
      this.done = true;
      this.view.showComplete(0);
      return;
    }
    this.beginTrial(0);
  }

  private beginTrial(index: number): void {
    if (!this.session) throw new Error("session not started");
    this.index = index;
    const info = this.session.trials[index]!;
    this.trial = new TrialClicks(info.required_clicks, this.session.image_size);
    this.trialStart = this.now();
    this.view.clearNotice();
    this.view.showTrial({
      index,
      total: this.session.trials.length,
      prompt: `Where would you put this ${info.target_class}?`,
      imageUrl: this.api.imageUrl(info.image_url),
      targetClass: info.target_class,
      required: info.required_clicks,
    });
    this.view.updateClicks([], info.required_clicks);
    this.view.setSubmitEnabled(false);
  }

  /** Click forwarded from the page, already in image pixels. */
  handleClick(x: number, y: number): void {
    if (this.done || this.inFlight || !this.trial) return;
    const tMs = this.now() - this.trialStart;
    const outcome = this.trial.record(x, y, tMs);
    if (!outcome.ok) {
      this.view.notify(noticeFor(outcome.reason, this.trial.required));
    } else {
      this.view.clearNotice();
    }
    this.refreshClickViews();
  }

  /** Click at client coordinates; maps through the element rect first. */
  handleDisplayClick(clientX: number, clientY: number, rect: DisplayRect): void {
    if (!this.session) return;
    const pt = displayToImage(clientX, clientY, rect, this.session.image_size);
    if (pt === null) {
      this.view.notify("That click landed outside the image.");
      return;
    }
    this.handleClick(pt.x, pt.y);
  }

  handleUndo(): void {
    if (this.done || this.inFlight || !this.trial) return;
    if (this.trial.undo() !== undefined) {
      this.view.clearNotice();
    }
    this.refreshClickViews();
  }

  async handleSubmit(): Promise<void> {
    // incomplete trials cannot be submitted from the client at all
    if (this.done || this.inFlight || !this.trial || !this.trial.complete) return;
    if (!this.session) return;
    const info = this.currentTrial;
    this.inFlight = true;
    this.view.setSubmitEnabled(false);
    let outcome;
    try {
      outcome = await this.api.submit(this.session.session_id, info.trial_id, this.trial.payload());
    } catch (err) {
      this.inFlight = false;
      this.view.notify(`Network problem: ${String(err)}. Your clicks are saved; try again.`);
      this.view.setSubmitEnabled(true);
      return;
    }
    this.inFlight = false;
    switch (outcome.kind) {
      case "ok":
        this.advance();
        return;
      case "violations":
        this.view.notify(`The server rejected this response: ${outcome.violations.join("; ")}`);
        this.view.setSubmitEnabled(this.trial.complete);
        return;
      case "already_submitted":
        this.view.notify("This trial was already recorded; moving on.");
        this.advance();
        return;
      case "rejected":
        this.view.notify(`Submission failed (${outcome.status}): ${outcome.message}`);
        this.view.setSubmitEnabled(this.trial.complete);
        return;
    }
  }

  private refreshClickViews(): void {
    if (!this.trial) return;
    this.view.updateClicks(this.trial.clicks, this.trial.required - this.trial.count);
    this.view.setSubmitEnabled(this.trial.complete && !this.inFlight);
  }

  private advance(): void {
    if (!this.session) return;
    const next = this.index + 1;
    if (next < this.session.trials.length) {
      this.beginTrial(next);
    } else {
      this.done = true;
      this.trial = null;
      this.view.showComplete(this.session.trials.length);
    }
  }
}

function noticeFor(
  reason: "duplicate" | "out_of_bounds" | "already_complete",
  required: number,
): string {
  switch (reason) {
    case "duplicate":
      return "That spot is already marked; the click was ignored. Pick a different pixel.";
    case "out_of_bounds":
      return "That click landed outside the image.";
    case "already_complete":
      return `All ${required} clicks are recorded. Submit, or undo to change one.`;
  }
}
