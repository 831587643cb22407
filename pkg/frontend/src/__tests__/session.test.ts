import { act, renderHook } from "@testing-library/react";
import { describe, expect, it } from "vitest";
import { useSession } from "../session";
import type { RunRecord } from "../types";

const DONE: RunRecord = {
  runId: "run-done",
  status: "succeeded",
  worksheet: {
    intro: "Hi",
    tasks: [],
    profileId: "p",
    markdown: "Hi",
    wordCount: 1,
  },
};

describe("session store", () => {
  it("caches only runs the API marked done", () => {
    const { result } = renderHook(() => useSession());
    act(() => {
      result.current.cacheRun({ runId: "run-failed", status: "failed", worksheet: null });
      result.current.cacheRun(DONE);
    });
    expect(Object.keys(result.current.session.doneRuns)).toEqual(["run-done"]);
  });

  it("tracks and drops active job ids", () => {
    const { result } = renderHook(() => useSession());
    act(() => {
      result.current.trackJob("job-1");
      result.current.trackJob("job-2");
    });
    expect(result.current.session.activeJobIds).toEqual(["job-1", "job-2"]);
    act(() => {
      result.current.dropJob("job-1");
    });
    expect(result.current.session.activeJobIds).toEqual(["job-2"]);
  });

  it("keeps selection changes independent", () => {
    const { result } = renderHook(() => useSession());
    act(() => {
      result.current.select({ profileId: "p1" });
      result.current.select({ taskId: "t1" });
    });
    expect(result.current.session.profileId).toBe("p1");
    expect(result.current.session.taskId).toBe("t1");
  });
});
