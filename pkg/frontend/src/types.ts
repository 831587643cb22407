// Wire types for the engine's HTTP API (camelCase, matching its canonical JSON).

export type Level = "low" | "high";
export type Gender = "male" | "female" | "unspecified";
export type BloomTier = "easy" | "medium" | "advanced";

export const DIMENSIONS = [
  "didacticalStructure",
  "clarity",
  "creativity",
  "suitability",
] as const;
export type RubricDimension = (typeof DIMENSIONS)[number];

export const DIMENSION_LABELS: Record<RubricDimension, string> = {
  didacticalStructure: "Didactical structure",
  clarity: "Clarity of the task",
  creativity: "Creativity",
  suitability: "Suitability of the task for learners",
};

export interface LearnerProfile {
  id: string;
  knowledge: Level;
  motivation: Level;
  age?: number | null;
  gender?: Gender;
  grade: number;
  subject?: string;
  interests?: string[];
  notes?: string | null;
}

export interface StarterTask {
  id: string;
  grade: number;
  topic: string;
  statement: string;
  answerKey?: string | null;
}

export interface WorksheetTask {
  index: number;
  tier: BloomTier;
  statement: string;
  hints: string[];
  scaffolds: string[];
  motivationalComment?: string | null;
}

export interface Worksheet {
  intro: string;
  tasks: WorksheetTask[];
  profileId: string;
  markdown: string;
  wordCount: number;
}

export interface RubricScore {
  dimension: RubricDimension;
  raw: number;
  justification: string;
}

export interface Evaluation {
  scores: RubricScore[];
  diagnostics: string;
  worksheetRef: string;
  invertedScores?: Record<RubricDimension, number>;
}

export interface RunRecord {
  runId: string;
  status: "succeeded" | "failed";
  worksheet?: Worksheet | null;
  evaluation?: Evaluation | null;
  failure?: { stage: string; error: string } | null;
}

export interface JobStatus {
  jobId: string;
  state: "queued" | "running" | "done" | "failed";
  stage?: string | null;
  progress: { completed: number; total: number };
  error?: string | null;
  runIds: string[];
}

export interface RatingAggregateEntry {
  dimension: RubricDimension;
  mean: number;
  rangeMin: number;
  rangeMax: number;
  k: number;
  display: string;
}

export type RatingAggregate = Record<RubricDimension, RatingAggregateEntry>;

export interface StabilityStat {
  profileId: string;
  dimension: RubricDimension;
  n: number;
  mean: number;
  sd: number;
  values: number[];
  cell: string;
}

export interface StabilityResult {
  stats: StabilityStat[];
  partial: boolean;
  failures: string[];
  failedIterations: number[];
  runIds: string[];
  table: string;
}

export interface StabilityJob extends JobStatus {
  result?: StabilityResult | null;
}
