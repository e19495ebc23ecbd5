import type { Click } from "./types.js";

export type RecordOutcome =
  | { ok: true; click: Click }
  | { ok: false; reason: "duplicate" | "out_of_bounds" | "already_complete" };

/**
 * Click buffer for one trial.
 *
 * Enforces the submission contract locally: integer coordinates inside
 * [0, imageSize) on both axes, no repeated coordinate within the trial,
 * and never more than the required number of clicks. The buffer does no
 * aggregation of any kind; it stores raw clicks for submission.
 */
export class TrialClicks {
  private recorded: Click[] = [];

  constructor(
    readonly required: number,
    readonly imageSize: number,
  ) {
    if (!Number.isInteger(required) || required < 1) {
      throw new RangeError(`required must be a positive integer, got ${required}`);
    }
    if (!Number.isInteger(imageSize) || imageSize < 1) {
      throw new RangeError(`imageSize must be a positive integer, got ${imageSize}`);
    }
  }

  get clicks(): readonly Click[] {
    return this.recorded;
  }

  get count(): number {
    return this.recorded.length;
  }

  get complete(): boolean {
    return this.recorded.length === this.required;
  }

  record(x: number, y: number, tMs: number): RecordOutcome {
    if (this.recorded.length >= this.required) {
      return { ok: false, reason: "already_complete" };
    }
    if (
      !Number.isInteger(x) ||
      !Number.isInteger(y) ||
      x < 0 ||
      y < 0 ||
      x >= this.imageSize ||
      y >= this.imageSize
    ) {
      return { ok: false, reason: "out_of_bounds" };
    }
    if (this.recorded.some((c) => c.x === x && c.y === y)) {
      return { ok: false, reason: "duplicate" };
    }
    const click: Click = { x, y, t_ms: Math.max(0, Math.round(tMs)) };
    this.recorded.push(click);
    return { ok: true, click };
  }

  undo(): Click | undefined {
    return this.recorded.pop();
  }

  /** Copy of the recorded clicks in recording order. */
  payload(): Click[] {
    return this.recorded.map((c) => ({ ...c }));
  }
}
