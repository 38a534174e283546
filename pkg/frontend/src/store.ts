/**
 * Client-side state for one query round: which samples are shown and what the
 * annotator has chosen so far. Submission is blocked until every pending
 * sample is labeled or explicitly skipped, and the payload sent to the server
 * is exactly the selection the UI shows.
 */

import type { LabelChoice, LabelSubmission, QueryItem } from "./api";

export class RoundStore {
  private choices = new Map<number, LabelChoice>();

  constructor(public readonly queries: QueryItem[]) {}

  choose(index: number, choice: LabelChoice): void {
    if (!this.queries.some((q) => q.index === index)) {
      throw new Error(`index ${index} is not part of this round`);
    }
    this.choices.set(index, choice);
  }

  clear(index: number): void {
    this.choices.delete(index);
  }

  choiceFor(index: number): LabelChoice | undefined {
    return this.choices.get(index);
  }

  labeledCount(): number {
    return this.choices.size;
  }

  /** True once every shown sample has a choice (inlier, outlier, or skip). */
  canSubmit(): boolean {
    return (
      this.queries.length > 0 &&
      this.queries.every((q) => this.choices.has(q.index))
    );
  }

  /** The request body: one entry per shown sample, in display order. */
  payload(): LabelSubmission[] {
    if (!this.canSubmit()) {
      throw new Error("cannot submit: not every sample is labeled or skipped");
    }
    return this.queries.map((q) => ({
      index: q.index,
      label: this.choices.get(q.index)!,
    }));
  }
}
