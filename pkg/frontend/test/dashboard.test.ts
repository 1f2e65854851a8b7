import { describe, expect, it } from "vitest";

import { buildDashboard, buildRow, offlineDashboard } from "../src/dashboard";
import type { Form, ItemRecord, StatusDoc } from "../src/types";

function item(id: string, state: string): ItemRecord {
  const form: Form = {
    item_id: id,
    description: "",
    groups: [],
    actions: ["Launch the Job"],
  };
  return {
    id,
    type_id: "job_launch",
    name: `Job Launch ${id}`,
    state,
    form,
    project: "proj",
    created_at: "2026-08-23T00:00:00Z",
    updated_at: "2026-08-23T00:00:00Z",
  };
}

function status(id: string, state: string, jobStatus?: string): StatusDoc {
  return {
    item_id: id,
    state,
    job: jobStatus
      ? {
          job_id: "job-001-abc123",
          status: jobStatus,
          exit_code: jobStatus === "Finished" ? 0 : null,
          started_at: "2026-08-23T00:00:01Z",
          ended_at: null,
        }
      : null,
  };
}

describe("buildRow", () => {
  it("prefers the live status document over the cached item state", () => {
    const row = buildRow(item("i1", "ReadyToProcess"), status("i1", "Processing", "Running"));
    expect(row.stateBadge).toBe("Processing");
    expect(row.jobBadge).toBe("Running");
    expect(row.buttons).toEqual({ edit: false, process: false, cancel: true });
  });

  it("falls back to the item state when no status is available", () => {
    const row = buildRow(item("i2", "FormReady"));
    expect(row.stateBadge).toBe("FormReady");
    expect(row.jobBadge).toBeNull();
    expect(row.buttons).toEqual({ edit: true, process: false, cancel: false });
  });

  it("shows no job badge when the status has no job", () => {
    const row = buildRow(item("i3", "ReadyToProcess"), status("i3", "ReadyToProcess"));
    expect(row.jobBadge).toBeNull();
    expect(row.buttons.process).toBe(true);
  });
});

describe("buildDashboard", () => {
  it("keeps item order and pairs each row with its status", () => {
    const items = [item("a", "FormReady"), item("b", "Processed")];
    const statuses = new Map<string, StatusDoc>([
      ["b", status("b", "Processed", "Finished")],
    ]);
    const dash = buildDashboard(items, statuses);
    expect(dash.offline).toBe(false);
    expect(dash.rows.map((r) => r.id)).toEqual(["a", "b"]);
    expect(dash.rows[1].jobBadge).toBe("Finished");
    expect(dash.rows[1].buttons).toEqual({
      edit: true,
      process: true,
      cancel: false,
    });
  });
});

describe("offlineDashboard", () => {
  it("keeps the last known rows and raises the offline flag", () => {
    const dash = buildDashboard([item("a", "Processing")], new Map());
    const offline = offlineDashboard(dash);
    expect(offline.offline).toBe(true);
    expect(offline.rows).toEqual(dash.rows);
  });

  it("starts empty when the first poll already failed", () => {
    const offline = offlineDashboard();
    expect(offline.rows).toEqual([]);
    expect(offline.offline).toBe(true);
  });
});
