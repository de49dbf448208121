// HTML string rendering for the review and questionnaire pages.
//
// Clinical text is never transformed client-side: statements are escaped for
// HTML safety but rendered verbatim, and blinded pages carry aliases only.

import type { Questionnaire, Report, Violation } from "./types.js";
import type { ReviewState } from "./reviewState.js";
import { displayText, isDirty } from "./reviewState.js";

interface EditRecord {
  target_kind: string;
  target_index: number;
  old_text: string;
  new_text: string;
  editor_id: string;
  at: string;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function violationPanel(violations: Violation[]): string {
  if (violations.length === 0) {
    return "";
  }
  const rows = violations
    .map(
      (v) => `
    <li class="violation ${v.severity}">
      <strong>${escapeHtml(v.rule_id ?? "unruled")}</strong> — ${escapeHtml(v.kind)}
      <p>${escapeHtml(v.regeneration_instruction)}</p>
    </li>`,
    )
    .join("");
  return `
  <section id="violations" class="violations-panel">
    <h2>Open fact-check violations</h2>
    <ul>${rows}</ul>
  </section>`;
}

function editableList(state: ReviewState, kind: "finding" | "interpretation"): string {
  const items = kind === "finding" ? state.report.findings : state.report.interpretation;
  return items
    .map((_, index) => {
      const text = displayText(state, kind, index);
      const dirty = isDirty(state, kind, index) ? " dirty" : "";
      return `
    <li id="${kind}-${index + 1}" class="item${dirty}">
      <textarea data-kind="${kind}" data-index="${index}">${escapeHtml(text)}</textarea>
    </li>`;
    })
    .join("");
}

export function renderReviewPage(state: ReviewState): string {
  const { report } = state;
  const bio = report.biostatistics;
  const needsReview = report.meta.state === "NeedsManualReview";
  const metricRows = report.metrics
    .map(
      (row) =>
        `<tr><td>${escapeHtml(row.attribute)}</td><td>${escapeHtml(String(row.value))}</td>` +
        `<td>${escapeHtml(row.unit)}</td></tr>`,
    )
    .join("");
  const tracingFigures = report.tracings
    .map((tracing, i) => {
      const src = tracing.image_ref.startsWith("sha256:")
        ? `/v1/images/${tracing.image_ref.slice(7)}`
        : tracing.image_ref;
      return `
    <figure id="tracing-${i + 1}">
      <img src="${escapeHtml(src)}" alt="${escapeHtml(tracing.caption)}" class="zoomable">
      <figcaption>${escapeHtml(tracing.caption)} (${tracing.duration_seconds} s)</figcaption>
    </figure>`;
    })
    .join("");
  const conflictBanner = state.conflict
    ? `<div id="conflict-banner" role="alert">Report changed on the server (your revision ` +
      `${state.conflict.staleRevision} is stale). Reload to merge; your drafts are preserved.</div>`
    : "";
  return `
<article id="report-review" data-state="${escapeHtml(report.meta.state)}">
  ${conflictBanner}
  ${needsReview ? violationPanel(report.violations) : ""}
  <section id="biostatistics">
    <h1>Patient ${escapeHtml(bio.patient_id)}</h1>
    <p>${escapeHtml(bio.gender)}, ${bio.age_years} (${escapeHtml(bio.age_group)}),
       ${bio.monitoring_hours} h monitoring</p>
  </section>
  <section id="metrics"><h2>Metrics</h2><table>${metricRows}</table></section>
  <section id="tracings"><h2>Tracings</h2>${tracingFigures}</section>
  <section id="findings"><h2>Findings</h2><ol>${editableList(state, "finding")}</ol></section>
  <section id="interpretation"><h2>Interpretation</h2>
    <ol>${editableList(state, "interpretation")}</ol></section>
  ${editHistory(report.review.edits as EditRecord[])}
  <section id="signature">
    <p>Status: ${escapeHtml(report.review.status)}</p>
    <button id="save-reviewed">Save &amp; mark reviewed</button>
    <button id="save-signed">Sign</button>
  </section>
</article>`;
}

function editHistory(edits: EditRecord[]): string {
  if (edits.length === 0) {
    return "";
  }
  const rows = edits
    .map(
      (edit) => `
    <li>
      <span class="edit-target">${escapeHtml(edit.target_kind)} ${edit.target_index + 1}</span>
      by ${escapeHtml(edit.editor_id)} at ${escapeHtml(edit.at)}:
      <del>${escapeHtml(edit.old_text)}</del> → <ins>${escapeHtml(edit.new_text)}</ins>
    </li>`,
    )
    .join("");
  return `<section id="edit-history"><h2>Edit history</h2><ul>${rows}</ul></section>`;
}

const SCORES = [1, 2, 3, 4, 5] as const;

export function renderQuestionnairePage(questionnaire: Questionnaire): string {
  const metricSelectors = (alias: string) =>
    ["ACC", "CPL", "ORG", "CPH", "SCI", "CNS", "FFH", "FFB"]
      .map(
        (metric) => `
      <tr>
        <th>${metric}</th>
        <td>${SCORES.map(
          (score) =>
            `<label><input type="radio" name="${escapeHtml(alias)}:${metric}" ` +
            `value="${score}">${score}</label>`,
        ).join(" ")}</td>
      </tr>`,
      )
      .join("");
  const sections = questionnaire.sections
    .map(
      (section) => `
  <section class="model-section" data-alias="${escapeHtml(section.alias)}">
    <h2>${escapeHtml(section.alias)}</h2>
    <pre class="findings">${escapeHtml(section.findings_text)}</pre>
    <pre class="interpretation">${escapeHtml(section.interpretation_text)}</pre>
    <table class="rating-grid">${metricSelectors(section.alias)}</table>
  </section>`,
    )
    .join("");
  return `
<article id="questionnaire" data-patient="${escapeHtml(questionnaire.patient_id)}">
  <h1>Blinded validation — patient ${escapeHtml(questionnaire.patient_id)}</h1>
  <p>Rate each section from 1 (not at all) to 5 (excellent) on all eight metrics.</p>
  ${sections}
  <button id="submit-ratings" disabled>Submit ratings</button>
</article>`;
}
