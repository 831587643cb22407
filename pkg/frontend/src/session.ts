// Session state for one teacher sitting: current selection, active jobs,
// and a cache that only ever holds worksheets the API has marked done.

import { useCallback, useState } from "react";
import type { RunRecord } from "./types";

export interface UiSession {
  profileId: string | null;
  taskId: string | null;
  activeJobIds: string[];
  doneRuns: Record<string, RunRecord>;
}

export const emptySession: UiSession = {
  profileId: null,
  taskId: null,
  activeJobIds: [],
  doneRuns: {},
};

export function useSession() {
  const [session, setSession] = useState<UiSession>(emptySession);

  const select = useCallback((changes: Partial<Pick<UiSession, "profileId" | "taskId">>) => {
    setSession((s) => ({ ...s, ...changes }));
  }, []);

  const trackJob = useCallback((jobId: string) => {
    setSession((s) => ({ ...s, activeJobIds: [...s.activeJobIds, jobId] }));
  }, []);

  const dropJob = useCallback((jobId: string) => {
    setSession((s) => ({ ...s, activeJobIds: s.activeJobIds.filter((j) => j !== jobId) }));
  }, []);

  const cacheRun = useCallback((run: RunRecord) => {
    // only completed runs may be cached; in-flight worksheets are never stored
    if (run.status !== "succeeded" || !run.worksheet) return;
    setSession((s) => ({ ...s, doneRuns: { ...s.doneRuns, [run.runId]: run } }));
  }, []);

  return { session, select, trackJob, dropJob, cacheRun };
}
