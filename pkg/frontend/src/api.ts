/**
 * Typed client for the /v1 session API. The UI never computes losses or
 * metrics itself — every displayed number comes from these responses.
 */

export type Phase = "WARMUP" | "POLARIZING" | "AWAITING_LABELS" | "DONE" | "FAILED";

export type LabelChoice = "inlier" | "outlier" | "skip";

export interface LossHistogram {
  counts: number[];
  edges: number[];
  tau: number | null;
}

export interface RoundMetric {
  round: number;
  auc_test: number;
  ap_test: number;
}

export interface SessionState {
  id: string;
  phase: Phase;
  t: number;
  round: number;
  rounds_total: number;
  pending: number[];
  answered: number[];
  n_train: number;
  n_test: number;
  loss_histogram: LossHistogram | null;
  per_round_metrics: RoundMetric[];
  error: string | null;
}

export interface QueryItem {
  index: number;
  row_index: number;
  features: number[];
  features_normalized: number[];
  ensemble_loss: number;
  posterior_inlier: number | null;
}

export interface QueryRound {
  round: number;
  queries: QueryItem[];
}

export interface LabelSubmission {
  index: number;
  label: LabelChoice;
}

export interface ScoreRow {
  row_index: number;
  split: "train" | "test";
  score: number;
}

export interface ScoresResponse {
  scores: ScoreRow[];
  metrics: { auc_test: number; ap_test: number } | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  getState(sessionId: string): Promise<SessionState> {
    return fetch(`${this.baseUrl}/v1/sessions/${sessionId}`).then((r) =>
      asJson<SessionState>(r),
    );
  }

  getQueries(sessionId: string): Promise<QueryRound> {
    return fetch(`${this.baseUrl}/v1/sessions/${sessionId}/queries`).then((r) =>
      asJson<QueryRound>(r),
    );
  }

  postLabels(
    sessionId: string,
    labels: LabelSubmission[],
  ): Promise<{ accepted: number; remaining: number }> {
    return fetch(`${this.baseUrl}/v1/sessions/${sessionId}/labels`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ labels }),
    }).then((r) => asJson(r));
  }

  getScores(sessionId: string): Promise<ScoresResponse> {
    return fetch(`${this.baseUrl}/v1/sessions/${sessionId}/scores`).then((r) =>
      asJson<ScoresResponse>(r),
    );
  }
}
