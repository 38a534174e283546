/**
 * Page wiring: 1-second polling of session state, a labeling panel while a
 * query round is pending, and a progress panel throughout. One mutation is
 * in flight at a time; all state refreshes come from the server.
 */

import { ApiClient, ApiError } from "./api";
import { RoundStore } from "./store";
import {
  clearConflictBanner,
  renderConflictBanner,
  renderProgress,
  renderQueryRound,
} from "./render";

const POLL_INTERVAL_MS = 1000;

export class App {
  private store: RoundStore = new RoundStore([]);
  private shownRound = -1;
  private submitting = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: ApiClient,
    private sessionId: string,
    private queryContainer: HTMLElement,
    private progressContainer: HTMLElement,
  ) {}

  start(): void {
    void this.tick();
    this.timer = setInterval(() => void this.tick(), POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
  }

  private async tick(): Promise<void> {
    const state = await this.api.getState(this.sessionId);
    renderProgress(this.progressContainer, state);

    if (state.phase !== "AWAITING_LABELS") {
      this.showRound(new RoundStore([]), -1);
      if (state.phase === "DONE" || state.phase === "FAILED") this.stop();
      return;
    }
    try {
      const round = await this.api.getQueries(this.sessionId);
      if (round.round !== this.shownRound) {
        this.showRound(new RoundStore(round.queries), round.round);
      }
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 404)) throw err;
      // round already consumed by the trainer; the next poll catches up
    }
  }

  private showRound(store: RoundStore, round: number): void {
    this.store = store;
    this.shownRound = round;
    renderQueryRound(this.queryContainer, this.store, () => void this.submit());
  }

  private async submit(): Promise<void> {
    if (this.submitting || !this.store.canSubmit()) return;
    this.submitting = true;
    let conflict: string | null = null;
    try {
      await this.api.postLabels(this.sessionId, this.store.payload());
      clearConflictBanner(this.queryContainer);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        conflict = err.message;
        this.shownRound = -1; // force a refresh of the list
      } else {
        throw err;
      }
    } finally {
      this.submitting = false;
    }
    await this.tick();
    // render the banner after the refresh so the re-render does not wipe it
    if (conflict !== null) renderConflictBanner(this.queryContainer, conflict);
  }
}

export function boot(doc: Document): App | null {
  const params = new URLSearchParams(doc.location.search);
  const sessionId = params.get("session");
  const queries = doc.getElementById("queries");
  const progress = doc.getElementById("progress");
  if (!sessionId || !queries || !progress) return null;
  const app = new App(new ApiClient(), sessionId, queries, progress);
  app.start();
  return app;
}
