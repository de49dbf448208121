// Draft management for the report review flow.
//
// Drafts never mutate the fetched report object; the review request carries
// only changed items along with the text they were based on, so the server
// can detect mid-air collisions (409 / 422).

import type { ItemEditRequest, ItemKind, Report, ReviewRequest } from "./types.js";

export interface DraftKeyParts {
  kind: ItemKind;
  index: number;
}

export type DraftMap = Readonly<Record<string, string>>;

export interface ReviewState {
  readonly report: Report;
  readonly revision: number;
  readonly drafts: DraftMap;
  readonly conflict: ConflictInfo | null;
}

export interface ConflictInfo {
  message: string;
  staleRevision: number;
}

export function draftKey(kind: ItemKind, index: number): string {
  return `${kind}:${index}`;
}

export function parseDraftKey(key: string): DraftKeyParts {
  const [kind, index] = key.split(":");
  return { kind: kind as ItemKind, index: Number(index) };
}

export function initialState(report: Report, revision: number): ReviewState {
  return { report, revision, drafts: {}, conflict: null };
}

function serverText(report: Report, kind: ItemKind, index: number): string {
  const items = kind === "finding" ? report.findings : report.interpretation;
  const item = items[index];
  if (item === undefined) {
    throw new RangeError(`${kind} index ${index} out of range`);
  }
  return item.statement;
}

/** Record a local edit; editing back to the server text clears the draft. */
export function setDraft(
  state: ReviewState,
  kind: ItemKind,
  index: number,
  text: string,
): ReviewState {
  const key = draftKey(kind, index);
  const drafts: Record<string, string> = { ...state.drafts };
  if (text === serverText(state.report, kind, index)) {
    delete drafts[key];
  } else {
    drafts[key] = text;
  }
  return { ...state, drafts };
}

export function isDirty(state: ReviewState, kind: ItemKind, index: number): boolean {
  return draftKey(kind, index) in state.drafts;
}

export function dirtyCount(state: ReviewState): number {
  return Object.keys(state.drafts).length;
}

/** The text the UI shows: local draft when present, else the server text. */
export function displayText(state: ReviewState, kind: ItemKind, index: number): string {
  return state.drafts[draftKey(kind, index)] ?? serverText(state.report, kind, index);
}

/** Only changed items are sent, each with the old_text it was edited from. */
export function buildReviewRequest(
  state: ReviewState,
  reviewerId: string,
  status?: "reviewed" | "signed",
): ReviewRequest {
  const edits: ItemEditRequest[] = Object.entries(state.drafts)
    .map(([key, newText]) => {
      const { kind, index } = parseDraftKey(key);
      return {
        target_kind: kind,
        target_index: index,
        old_text: serverText(state.report, kind, index),
        new_text: newText,
      };
    })
    .sort((a, b) =>
      a.target_kind === b.target_kind
        ? a.target_index - b.target_index
        : a.target_kind.localeCompare(b.target_kind),
    );
  const request: ReviewRequest = { revision: state.revision, reviewer_id: reviewerId, edits };
  if (status !== undefined) {
    request.status = status;
  }
  return request;
}

/** Successful save: adopt the server's new document, drop all drafts. */
export function applySaved(state: ReviewState, report: Report, revision: number): ReviewState {
  return { report, revision, drafts: {}, conflict: null };
}

/**
 * 409 conflict: surface a reload-and-merge prompt. Drafts are retained
 * verbatim so nothing the reviewer typed is lost.
 */
export function applyConflict(state: ReviewState, message: string): ReviewState {
  return { ...state, conflict: { message, staleRevision: state.revision } };
}

/**
 * Reload after a conflict: re-key the drafts against the fresh report.
 * Drafts whose text now equals the server's are dropped; the rest stay dirty.
 */
export function mergeAfterReload(
  state: ReviewState,
  report: Report,
  revision: number,
): ReviewState {
  const drafts: Record<string, string> = {};
  for (const [key, text] of Object.entries(state.drafts)) {
    const { kind, index } = parseDraftKey(key);
    const items = kind === "finding" ? report.findings : report.interpretation;
    if (items[index] !== undefined && items[index]!.statement !== text) {
      drafts[key] = text;
    }
  }
  return { report, revision, drafts, conflict: null };
}
