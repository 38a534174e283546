/**
 * DOM rendering. Pure functions from server data (plus the round store) to
 * elements; no losses or metrics are computed here.
 */

import type { QueryItem, SessionState, LossHistogram, RoundMetric } from "./api";
import type { RoundStore } from "./store";

const CHOICES = ["inlier", "outlier", "skip"] as const;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function formatFeatures(q: QueryItem): string {
  return q.features.map((v) => v.toPrecision(4)).join(", ");
}

function formatNormalized(q: QueryItem): string {
  return q.features_normalized.map((v) => v.toFixed(3)).join(", ");
}

/**
 * The labeling panel: one row per pending sample with inlier/outlier/skip
 * toggles, plus a submit button that stays disabled until the round is fully
 * answered.
 */
export function renderQueryRound(
  container: HTMLElement,
  store: RoundStore,
  onSubmit: () => void,
): void {
  const doc = container.ownerDocument;
  container.innerHTML = "";

  const panel = el(doc, "section", "query-panel");
  if (store.queries.length === 0) {
    panel.hidden = true;
    container.appendChild(panel);
    return;
  }

  const list = el(doc, "ul", "query-list");
  for (const q of store.queries) {
    const row = el(doc, "li", "query-row");
    row.dataset.index = String(q.index);

    const info = el(doc, "span", "query-info");
    info.textContent = `#${q.row_index}  loss ${q.ensemble_loss.toFixed(3)}`;
    if (q.posterior_inlier !== null) {
      info.textContent += `  p(inlier) ${q.posterior_inlier.toFixed(2)}`;
    }
    // raw values are what the human judges; normalized shown on hover
    info.title = `raw: ${formatFeatures(q)}\nnormalized: ${formatNormalized(q)}`;
    row.appendChild(info);

    for (const choice of CHOICES) {
      const button = el(doc, "button", `choice choice-${choice}`, choice);
      if (store.choiceFor(q.index) === choice) button.classList.add("selected");
      button.addEventListener("click", () => {
        store.choose(q.index, choice);
        renderQueryRound(container, store, onSubmit);
      });
      row.appendChild(button);
    }
    list.appendChild(row);
  }
  panel.appendChild(list);

  const submit = el(doc, "button", "submit", "Submit round");
  submit.disabled = !store.canSubmit();
  submit.addEventListener("click", () => {
    if (store.canSubmit()) onSubmit();
  });
  panel.appendChild(submit);
  container.appendChild(panel);
}

function renderHistogram(doc: Document, histogram: LossHistogram): HTMLElement {
  const wrap = el(doc, "div", "histogram");
  const max = Math.max(...histogram.counts, 1);
  for (let i = 0; i < histogram.counts.length; i++) {
    const bar = el(doc, "div", "bar");
    bar.style.height = `${(100 * histogram.counts[i]) / max}%`;
    bar.title = `[${histogram.edges[i].toFixed(2)}, ${histogram.edges[i + 1].toFixed(2)}): ${histogram.counts[i]}`;
    if (
      histogram.tau !== null &&
      histogram.edges[i] <= histogram.tau &&
      histogram.tau < histogram.edges[i + 1]
    ) {
      bar.classList.add("tau-marker");
      bar.title += `  tau=${histogram.tau.toFixed(3)}`;
    }
    wrap.appendChild(bar);
  }
  return wrap;
}

function renderMetricCurve(doc: Document, metrics: RoundMetric[]): HTMLElement {
  const wrap = el(doc, "div", "metric-curve");
  for (const m of metrics) {
    wrap.appendChild(
      el(doc, "span", "metric-point", `r${m.round}: AUC ${m.auc_test.toFixed(3)}`),
    );
  }
  return wrap;
}

/** Phase badge, round progress, loss histogram with tau marker, metric curve. */
export function renderProgress(container: HTMLElement, state: SessionState): void {
  const doc = container.ownerDocument;
  container.innerHTML = "";
  const panel = el(doc, "section", "progress-panel");

  const badge = el(doc, "span", `phase-badge phase-${state.phase.toLowerCase()}`, state.phase);
  panel.appendChild(badge);
  panel.appendChild(
    el(doc, "span", "round-progress", `round ${state.round}/${state.rounds_total}`),
  );
  if (state.error) {
    panel.appendChild(el(doc, "div", "error", state.error));
  }
  if (state.loss_histogram) {
    panel.appendChild(renderHistogram(doc, state.loss_histogram));
  }
  if (state.per_round_metrics.length > 0) {
    panel.appendChild(renderMetricCurve(doc, state.per_round_metrics));
  }
  container.appendChild(panel);
}

/** Inline banner for a 409 from the server; the caller refreshes the list. */
export function renderConflictBanner(container: HTMLElement, message: string): void {
  const doc = container.ownerDocument;
  const banner = el(doc, "div", "conflict-banner", `Label conflict: ${message}`);
  container.prepend(banner);
}

export function clearConflictBanner(container: HTMLElement): void {
  for (const node of Array.from(container.querySelectorAll(".conflict-banner"))) {
    node.remove();
  }
}
