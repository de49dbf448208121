import type { Questionnaire, Report } from "../src/types.js";

export function sampleReport(state: Report["meta"]["state"] = "Complete"): Report {
  return {
    schema_version: "report/v1",
    biostatistics: {
      patient_id: "P-0001",
      gender: "female",
      age_years: 72,
      age_group: "elderly",
      monitoring_hours: 24,
    },
    metrics: [
      { attribute: "AF Burden", value: 12, unit: "%", context: null },
      { attribute: "PR Interval", value: 210, unit: "ms", context: null },
    ],
    tracings: [
      {
        image_ref: "sha256:" + "a".repeat(64),
        caption: "AF episode at 02:13",
        duration_seconds: 10,
        arrhythmia_tag: "Atrial Fibrillation (AF)",
      },
    ],
    findings: [
      {
        statement: "AF Burden is 12 % over the monitoring period",
        source_modality: "metrics",
        parameters: { AF_BURDEN_PCT: { value: 12, unit: "%" } },
        agent_iteration: 0,
      },
      {
        statement: "PR Interval is 210 ms on average over the monitoring period",
        source_modality: "metrics",
        parameters: { PR_INTERVAL_MS: { value: 210, unit: "ms" } },
        agent_iteration: 0,
      },
    ],
    interpretation: [
      {
        statement: "The PR interval is slightly prolonged, suggesting a first-degree AV block.",
        diagnosis_tags: ["FIRST_DEGREE_AV_BLOCK"],
        supports: [1],
        agent_iteration: 0,
      },
    ],
    violations:
      state === "NeedsManualReview"
        ? [
            {
              rule_id: "pr-interval-prolonged",
              kind: "missing_interpretation",
              finding_refs: [1],
              interpretation_refs: [],
              regeneration_instruction:
                "The patient has a prolonged PR interval, which may indicate a first-degree AV block or the potential for a more advanced block.",
              target_agent: "F2I",
              severity: "mandatory",
            },
          ]
        : [],
    meta: {
      engine_version: "0.1.0",
      model_names: { M2F: "atlas-8b", T2F: "borealis-vision", F2I: "atlas-8b" },
      guideline_set_version: "sha256:feed",
      demo_ids: { M2F: ["m2f-DEMO-A"] },
      factcheck_iterations: 0,
      state,
      created_at: "2026-01-01T00:00:00Z",
      degraded: false,
    },
    review: { status: "preliminary", edits: [], reviewer_id: null, reviewed_at: null },
  };
}

export function sampleQuestionnaire(): Questionnaire {
  return {
    patient_id: "P-0001",
    seed: 1,
    sections: [
      {
        alias: "Model A",
        findings_text: "Findings:\n- AF Burden is 12 % over the monitoring period",
        interpretation_text:
          "Interpretation:\n- Atrial fibrillation is present during the monitoring period.",
      },
      {
        alias: "Model B",
        findings_text: "Findings:\n- AF Burden is 12 % over the monitoring period",
        interpretation_text:
          "Interpretation:\n- Atrial fibrillation is present during the monitoring period.",
      },
      {
        alias: "Model C",
        findings_text: "Findings:\n- VT: not present in the ECG tracings",
        interpretation_text: "Interpretation:\n- No ventricular tachycardia was recorded.",
      },
    ],
  };
}

/** The real model names the blinded page must never leak. */
export const REAL_MODEL_NAMES = ["atlas-8b", "borealis-vision", "gpt-marquee", "llamoid-405b"];
