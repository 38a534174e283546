/**
 * Recorded response bodies matching the /v1 session API, used to render the
 * UI without a live server.
 */

import type { QueryItem, QueryRound, SessionState } from "../src/api";

export function makeQuery(index: number, loss: number): QueryItem {
  return {
    index,
    row_index: index * 3 + 1,
    features: [0.31 + index / 100, 0.68 - index / 100, 0.52],
    features_normalized: [0.12 + index / 100, -0.4, 0.9],
    ensemble_loss: loss,
    posterior_inlier: 1 / (1 + Math.exp(loss - 2)),
  };
}

export const fiveQueryRound: QueryRound = {
  round: 2,
  queries: [
    makeQuery(4, 3.91),
    makeQuery(17, 3.42),
    makeQuery(2, 2.77),
    makeQuery(33, 2.51),
    makeQuery(8, 2.05),
  ],
};

export const emptyRound: QueryRound = { round: 2, queries: [] };

export const awaitingState: SessionState = {
  id: "s-1",
  phase: "AWAITING_LABELS",
  t: 60,
  round: 1,
  rounds_total: 5,
  pending: fiveQueryRound.queries.map((q) => q.index),
  answered: [],
  n_train: 210,
  n_test: 90,
  loss_histogram: {
    counts: [40, 88, 52, 18, 7, 3, 1, 0, 0, 1],
    edges: [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0],
    tau: 1.73,
  },
  per_round_metrics: [{ round: 1, auc_test: 0.93, ap_test: 0.71 }],
  error: null,
};

export const doneState: SessionState = {
  ...awaitingState,
  phase: "DONE",
  round: 5,
  pending: [],
  answered: [],
};
