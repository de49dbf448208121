// Wire types mirroring the service's published JSON schemas (report/v1 etc.).

export type Modality = "metrics" | "tracing";

export interface ParameterValue {
  value: number | string | boolean;
  unit: string | null;
}

export interface FindingItem {
  statement: string;
  source_modality: Modality;
  parameters: Record<string, ParameterValue>;
  agent_iteration: number;
}

export interface InterpretationItem {
  statement: string;
  diagnosis_tags: string[];
  supports: number[];
  agent_iteration: number;
}

export interface Violation {
  rule_id: string | null;
  kind:
    | "missing_interpretation"
    | "contradicted_interpretation"
    | "unsupported_interpretation";
  finding_refs: number[];
  interpretation_refs: number[];
  regeneration_instruction: string;
  target_agent: "M2F" | "T2F" | "F2I";
  severity: "advisory" | "mandatory";
}

export interface MetricRow {
  attribute: string;
  value: number | string | boolean;
  unit: string;
  context: string | null;
}

export interface TracingRef {
  image_ref: string;
  caption: string;
  duration_seconds: number;
  arrhythmia_tag: string | null;
}

export interface Report {
  schema_version: "report/v1";
  biostatistics: {
    patient_id: string;
    gender: "male" | "female" | "other";
    age_years: number;
    age_group: "pediatric" | "adult" | "elderly";
    monitoring_hours: number;
  };
  metrics: MetricRow[];
  tracings: TracingRef[];
  findings: FindingItem[];
  interpretation: InterpretationItem[];
  violations: Violation[];
  meta: {
    engine_version: string;
    model_names: Record<string, string>;
    guideline_set_version: string;
    demo_ids: Record<string, string[]>;
    factcheck_iterations: number;
    state: "Complete" | "NeedsManualReview" | "Failed";
    created_at: string;
    degraded: boolean;
  };
  review: {
    status: "preliminary" | "reviewed" | "signed";
    edits: unknown[];
    reviewer_id: string | null;
    reviewed_at: string | null;
  };
}

export type ItemKind = "finding" | "interpretation";

export interface ItemEditRequest {
  target_kind: ItemKind;
  target_index: number;
  old_text: string;
  new_text: string;
}

export interface ReviewRequest {
  revision: number;
  reviewer_id: string;
  status?: "reviewed" | "signed";
  edits: ItemEditRequest[];
}

export const METRIC_IDS = [
  "ACC",
  "CPL",
  "ORG",
  "CPH",
  "SCI",
  "CNS",
  "FFH",
  "FFB",
] as const;

export type MetricId = (typeof METRIC_IDS)[number];

export interface Rating {
  rater_id: string;
  patient_id: string;
  model_alias: string;
  metric: MetricId;
  score: 1 | 2 | 3 | 4 | 5;
}

export interface QuestionnaireSection {
  alias: string;
  findings_text: string;
  interpretation_text: string;
}

export interface Questionnaire {
  patient_id: string;
  seed: number;
  sections: QuestionnaireSection[];
}
