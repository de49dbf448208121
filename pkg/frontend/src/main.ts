// SPA entry point: wires the pure state modules to the DOM.
//
// Routes:
//   #/reports/<id>         report review flow
//   #/questionnaire        blinded rating flow (questionnaire JSON via file input)

import { ApiClient, ConflictError } from "./api.js";
import {
  applyConflict,
  applySaved,
  buildReviewRequest,
  initialState,
  mergeAfterReload,
  setDraft,
  type ReviewState,
} from "./reviewState.js";
import {
  initialForm,
  isComplete,
  setScore,
  toRatings,
  type RatingFormState,
  type Score,
} from "./ratingForm.js";
import { renderQuestionnairePage, renderReviewPage } from "./render.js";
import type { ItemKind, MetricId, Questionnaire } from "./types.js";

const api = new ApiClient();
const root = document.getElementById("app") ?? document.body;

function reviewerId(): string {
  return (document.getElementById("reviewer") as HTMLInputElement | null)?.value || "reviewer";
}

// --- report review flow ------------------------------------------------------

let reviewState: ReviewState | null = null;
let currentReportId = "";

function paintReview(): void {
  if (reviewState === null) return;
  root.innerHTML = renderReviewPage(reviewState);
  root.querySelectorAll<HTMLTextAreaElement>("textarea[data-kind]").forEach((area) => {
    area.addEventListener("input", () => {
      if (reviewState === null) return;
      reviewState = setDraft(
        reviewState,
        area.dataset.kind as ItemKind,
        Number(area.dataset.index),
        area.value,
      );
      area.closest("li")?.classList.toggle(
        "dirty",
        reviewState.drafts[`${area.dataset.kind}:${area.dataset.index}`] !== undefined,
      );
    });
  });
  document.getElementById("save-reviewed")?.addEventListener("click", () => save("reviewed"));
  document.getElementById("save-signed")?.addEventListener("click", () => save("signed"));
}

async function save(status: "reviewed" | "signed"): Promise<void> {
  if (reviewState === null) return;
  const request = buildReviewRequest(reviewState, reviewerId(), status);
  try {
    const { report, revision } = await api.postReview(currentReportId, request);
    reviewState = applySaved(reviewState, report, revision);
  } catch (error) {
    if (error instanceof ConflictError && reviewState !== null) {
      reviewState = applyConflict(reviewState, "revision conflict");
      const fresh = await api.getReport(currentReportId);
      reviewState = mergeAfterReload(reviewState, fresh.report, fresh.revision);
    } else {
      throw error;
    }
  }
  paintReview();
}

async function openReport(reportId: string): Promise<void> {
  currentReportId = reportId;
  const { report, revision } = await api.getReport(reportId);
  reviewState = initialState(report, revision);
  paintReview();
}

// --- blinded rating flow ------------------------------------------------------

let formState: RatingFormState | null = null;

function paintQuestionnaire(questionnaire: Questionnaire): void {
  formState = initialForm(
    questionnaire.patient_id,
    questionnaire.sections.map((s) => s.alias),
  );
  root.innerHTML = renderQuestionnairePage(questionnaire);
  const submit = document.getElementById("submit-ratings") as HTMLButtonElement;
  root.querySelectorAll<HTMLInputElement>("input[type=radio]").forEach((input) => {
    input.addEventListener("change", () => {
      if (formState === null) return;
      const [alias, metric] = input.name.split(":");
      formState = setScore(
        formState,
        alias!,
        metric as MetricId,
        Number(input.value) as Score,
      );
      submit.disabled = !isComplete(formState);
    });
  });
  submit.addEventListener("click", async () => {
    if (formState === null || !isComplete(formState)) return;
    const result = await api.postRatings(toRatings(formState, reviewerId()));
    submit.textContent = `Submitted ${result.accepted} ratings`;
    submit.disabled = true;
    if (result.rejected.length > 0) {
      const list = document.createElement("ul");
      list.id = "rejected-ratings";
      for (const row of result.rejected as Array<{ row: number; reason: string }>) {
        const item = document.createElement("li");
        item.textContent = `Row ${row.row}: ${row.reason}`;
        list.append(item);
      }
      submit.after(list);
    }
  });
}

function questionnaireLoader(): void {
  root.innerHTML = `
    <h1>Blinded rating</h1>
    <p>Load a questionnaire JSON produced by the validation toolkit.</p>
    <input type="file" id="questionnaire-file" accept="application/json">`;
  document.getElementById("questionnaire-file")?.addEventListener("change", async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (!file) return;
    paintQuestionnaire(JSON.parse(await file.text()) as Questionnaire);
  });
}

// --- router --------------------------------------------------------------------

function route(): void {
  const hash = window.location.hash;
  const reportMatch = /^#\/reports\/(.+)$/.exec(hash);
  if (reportMatch) {
    void openReport(reportMatch[1]!);
  } else {
    questionnaireLoader();
  }
}

window.addEventListener("hashchange", route);
route();
