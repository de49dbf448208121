// Blinded eight-metric rating form state. One 1-5 selector per metric per
// model alias; submission stays disabled until every cell is filled.

import { METRIC_IDS, type MetricId, type Rating } from "./types.js";

export type Score = 1 | 2 | 3 | 4 | 5;

export type FormGrid = Readonly<Record<string, Partial<Record<MetricId, Score>>>>;

export interface RatingFormState {
  readonly patientId: string;
  readonly aliases: readonly string[];
  readonly grid: FormGrid;
}

export function initialForm(patientId: string, aliases: readonly string[]): RatingFormState {
  const grid: Record<string, Partial<Record<MetricId, Score>>> = {};
  for (const alias of aliases) {
    grid[alias] = {};
  }
  return { patientId, aliases, grid };
}

export function setScore(
  state: RatingFormState,
  alias: string,
  metric: MetricId,
  score: Score,
): RatingFormState {
  if (!state.aliases.includes(alias)) {
    throw new RangeError(`unknown alias ${alias}`);
  }
  const grid = { ...state.grid, [alias]: { ...state.grid[alias], [metric]: score } };
  return { ...state, grid };
}

export function missingCells(state: RatingFormState): Array<{ alias: string; metric: MetricId }> {
  const missing: Array<{ alias: string; metric: MetricId }> = [];
  for (const alias of state.aliases) {
    for (const metric of METRIC_IDS) {
      if (state.grid[alias]?.[metric] === undefined) {
        missing.push({ alias, metric });
      }
    }
  }
  return missing;
}

/** Completeness gate: the submit button binds to this. */
export function isComplete(state: RatingFormState): boolean {
  return missingCells(state).length === 0;
}

/** One rating per (metric, alias); callable only on a complete form. */
export function toRatings(state: RatingFormState, raterId: string): Rating[] {
  if (!isComplete(state)) {
    throw new Error("rating form is incomplete");
  }
  const ratings: Rating[] = [];
  for (const alias of state.aliases) {
    for (const metric of METRIC_IDS) {
      ratings.push({
        rater_id: raterId,
        patient_id: state.patientId,
        model_alias: alias,
        metric,
        score: state.grid[alias]![metric]!,
      });
    }
  }
  return ratings;
}
