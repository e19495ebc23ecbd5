/** Wire types for the collection service API. */

export interface Click {
  x: number;
  y: number;
  t_ms: number;
}

export interface TrialInfo {
  trial_id: string;
  pair_id: number;
  image_id: number;
  image_url: string;
  target_class: string;
  required_clicks: number;
}

export interface SessionInfo {
  session_id: string;
  image_size: number;
  trials: TrialInfo[];
}

export type SubmitOutcome =
  | { kind: "ok"; remaining: number }
  | { kind: "violations"; violations: string[] }
  | { kind: "already_submitted" }
  | { kind: "rejected"; status: number; message: string };
