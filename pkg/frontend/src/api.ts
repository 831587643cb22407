// Thin typed client over the engine's HTTP API. All score aggregation and
// inversion happens server-side; this module only moves JSON.

import type {
  JobStatus,
  LearnerProfile,
  RatingAggregate,
  RubricDimension,
  RunRecord,
  StabilityJob,
  StarterTask,
} from "./types";

export class ApiError extends Error {
  status: number;
  detail: unknown;

  constructor(status: number, detail: unknown) {
    super(`API error ${status}`);
    this.status = status;
    this.detail = detail;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail: unknown = null;
    try {
      detail = (await response.json()).detail;
    } catch {
      detail = await response.text().catch(() => null);
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export const api = {
  listProfiles: () => request<LearnerProfile[]>("/profiles"),
  createProfile: (profile: LearnerProfile) =>
    request<{ id: string }>("/profiles", { method: "POST", body: JSON.stringify(profile) }),
  listTasks: () => request<StarterTask[]>("/tasks"),
  createTask: (task: StarterTask) =>
    request<{ id: string }>("/tasks", { method: "POST", body: JSON.stringify(task) }),
  startRun: (profileId: string, taskId: string) =>
    request<{ runId: string; jobId: string }>("/runs", {
      method: "POST",
      body: JSON.stringify({ profileId, taskId }),
    }),
  getRun: (runId: string) => request<RunRecord>(`/runs/${runId}`),
  getJob: (jobId: string) => request<JobStatus>(`/jobs/${jobId}`),
  submitRating: (body: {
    raterId: string;
    worksheetRef: string;
    scores: Record<RubricDimension, number>;
    openFeedback: string;
  }) => request<{ id: string }>("/ratings", { method: "POST", body: JSON.stringify(body) }),
  getAggregate: (worksheetRef: string) =>
    request<RatingAggregate>(`/worksheets/${worksheetRef}/ratings/aggregate`),
  startStability: (profileId: string, taskId: string, n: number) =>
    request<{ jobId: string }>("/stability", {
      method: "POST",
      body: JSON.stringify({ profileId, taskId, n }),
    }),
  getStability: (jobId: string) => request<StabilityJob>(`/stability/${jobId}`),
};

export const POLL_INTERVAL_MS = 1000;
