import { describe, expect, it } from "vitest";

import {
  applyConflict,
  applySaved,
  buildReviewRequest,
  dirtyCount,
  displayText,
  initialState,
  isDirty,
  mergeAfterReload,
  setDraft,
} from "../src/reviewState.js";
import { sampleReport } from "./fixtures.js";

describe("review drafts", () => {
  it("never mutates the fetched report", () => {
    const report = sampleReport();
    const frozen = JSON.stringify(report);
    let state = initialState(report, 1);
    state = setDraft(state, "interpretation", 0, "Edited text.");
    expect(JSON.stringify(report)).toBe(frozen);
    expect(state.report).toBe(report);
  });

  it("tracks dirty flags and display text", () => {
    let state = initialState(sampleReport(), 1);
    expect(isDirty(state, "finding", 0)).toBe(false);
    state = setDraft(state, "finding", 0, "New finding text");
    expect(isDirty(state, "finding", 0)).toBe(true);
    expect(displayText(state, "finding", 0)).toBe("New finding text");
    expect(displayText(state, "finding", 1)).toBe(
      "PR Interval is 210 ms on average over the monitoring period",
    );
  });

  it("editing back to the server text clears the draft", () => {
    const report = sampleReport();
    let state = initialState(report, 1);
    state = setDraft(state, "finding", 0, "changed");
    state = setDraft(state, "finding", 0, report.findings[0]!.statement);
    expect(dirtyCount(state)).toBe(0);
  });

  it("sends only changed items, each with its old_text", () => {
    const report = sampleReport();
    let state = initialState(report, 4);
    state = setDraft(state, "interpretation", 0, "Corrected diagnosis.");
    const request = buildReviewRequest(state, "dr-a", "reviewed");
    expect(request.revision).toBe(4);
    expect(request.status).toBe("reviewed");
    expect(request.edits).toEqual([
      {
        target_kind: "interpretation",
        target_index: 0,
        old_text: report.interpretation[0]!.statement,
        new_text: "Corrected diagnosis.",
      },
    ]);
  });

  it("a successful save adopts the server document and clears drafts", () => {
    let state = initialState(sampleReport(), 1);
    state = setDraft(state, "finding", 0, "draft");
    const fresh = sampleReport();
    state = applySaved(state, fresh, 2);
    expect(state.revision).toBe(2);
    expect(dirtyCount(state)).toBe(0);
    expect(state.conflict).toBeNull();
  });

  it("a 409 preserves drafts and surfaces a reload prompt", () => {
    let state = initialState(sampleReport(), 1);
    state = setDraft(state, "interpretation", 0, "my draft");
    state = applyConflict(state, "revision conflict");
    expect(state.conflict).not.toBeNull();
    expect(state.conflict!.staleRevision).toBe(1);
    expect(displayText(state, "interpretation", 0)).toBe("my draft");
  });

  it("reload-and-merge keeps drafts that still differ from the server", () => {
    let state = initialState(sampleReport(), 1);
    state = setDraft(state, "interpretation", 0, "my draft");
    state = setDraft(state, "finding", 0, "their text now");
    const fresh = sampleReport();
    fresh.findings[0]!.statement = "their text now"; // someone else made the same edit
    state = mergeAfterReload(state, fresh, 7);
    expect(state.revision).toBe(7);
    expect(isDirty(state, "interpretation", 0)).toBe(true);
    expect(isDirty(state, "finding", 0)).toBe(false);
    expect(state.conflict).toBeNull();
  });
});
