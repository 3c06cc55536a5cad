import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { CommandState, TelemetryRecord } from "../src/api.js";
import { DashboardApp } from "../src/app.js";

// In-memory stand-in for the service, driving the app deterministically.
class FakeService {
  records = new Map<string, TelemetryRecord[]>();
  commands: { id: number; station: string; state: CommandState; kind: string }[] = [];
  nextId = 1;
  enqueueCalls = 0;
  failing = false;

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    if (this.failing) {
      throw new TypeError("fetch failed");
    }
    const parsed = new URL(url);
    const params = parsed.searchParams;
    if (init?.method === "POST" && typeof init.body === "string") {
      for (const [key, value] of new URLSearchParams(init.body)) {
        params.set(key, value);
      }
    }
    const json = (payload: unknown) => new Response(JSON.stringify(payload), { status: 200 });
    switch (parsed.pathname) {
      case "/stations":
        return json(
          [...this.records.entries()].map(([station, rows]) => ({
            station,
            last_received_at: rows[rows.length - 1]?.received_at ?? 0,
            pending_commands: this.commands.filter(
              (c) => c.station === station && c.state === "PENDING",
            ).length,
          })),
        );
      case "/latest": {
        const rows = this.records.get(params.get("station") ?? "");
        return rows?.length
          ? json(rows[rows.length - 1])
          : new Response("ERR UNKNOWN_STATION", { status: 404 });
      }
      case "/danni": {
        const rows = this.records.get(params.get("station") ?? "");
        if (!rows) {
          return new Response("ERR UNKNOWN_STATION", { status: 404 });
        }
        const from = Number(params.get("from") ?? "0");
        return json(rows.filter((r) => r.timestamp >= from));
      }
      case "/commands/enqueue": {
        this.enqueueCalls += 1;
        const id = this.nextId++;
        this.commands.push({
          id,
          station: params.get("station") ?? "",
          state: "PENDING",
          kind: params.get("kind") ?? "",
        });
        return json({ id, state: "PENDING" });
      }
      case "/commands/status":
        return json(this.commands.filter((c) => c.station === params.get("station")));
      default:
        return new Response("ERR NOT_FOUND", { status: 404 });
    }
  };
}

function record(station: string, overrides: Partial<TelemetryRecord> = {}): TelemetryRecord {
  return {
    station,
    seq: 1,
    timestamp: 100,
    received_at: 100,
    temps: ["20.0", "20.0", "20.0", "20.0", "20.0", "20.0", "20.0", "20.0"],
    pumps: [0, 0, 0, 0, 0, 0, 0, 0],
    mode: "MANUAL",
    ...overrides,
  };
}

describe("DashboardApp", () => {
  let service: FakeService;
  let root: HTMLElement;
  let app: DashboardApp;

  beforeEach(() => {
    service = new FakeService();
    service.records.set("ST01", [record("ST01")]);
    root = document.createElement("div");
    document.body.replaceChildren(root);
    app = new DashboardApp(
      root,
      new ApiClient("http://fake", service.fetch),
      { pollPeriodS: 2, pushPeriodS: 1 },
      () => 101, // "now" one second after the last record
    );
  });

  it("renders the fleet overview", async () => {
    expect(await app.refresh()).toBe(true);
    const rows = root.querySelectorAll(".station-row");
    expect(rows).toHaveLength(1);
    expect(root.querySelector(".badge-stale")).toBeNull();
  });

  it("renders station detail after selection", async () => {
    await app.selectStation("ST01");
    expect(root.querySelector(".mode-badge")?.textContent).toBe("MANUAL");
    expect(root.querySelectorAll(".chart-point")).toHaveLength(8);
  });

  it("shows the unknown-station view on 404", async () => {
    await app.selectStation("GHOST");
    expect(root.querySelector(".unknown-station")).not.toBeNull();
  });

  it("blocks invalid commands client-side without sending", async () => {
    await app.selectStation("ST01");
    await app.submitCommand({ kind: "SETSETPOINT", index: 0, value: "200.0" });
    expect(service.enqueueCalls).toBe(0);
    expect(root.querySelector("#setpoint-error")?.textContent).toContain("between");
    await app.submitCommand({ kind: "SETPUMP", index: 8, value: 1 });
    expect(service.enqueueCalls).toBe(0);
    expect(root.querySelector("#pump-error")?.textContent).toContain("0..7");
  });

  it("sends valid commands, disables controls, re-enables on terminal state", async () => {
    await app.selectStation("ST01");
    await app.submitCommand({ kind: "SETPUMP", index: 0, value: 1 });
    expect(service.enqueueCalls).toBe(1);
    const send = root.querySelector<HTMLButtonElement>("#send-pump");
    expect(send?.disabled).toBe(true);
    expect(root.querySelector('.command-chip[data-state="PENDING"]')).not.toBeNull();
    service.commands[0]!.state = "ACKED";
    await app.refresh();
    expect(send?.disabled).toBe(false);
    expect(root.querySelector('.command-chip[data-state="ACKED"]')).not.toBeNull();
  });

  it("requires a station selection before sending", async () => {
    await app.submitCommand({ kind: "SETMODE", mode: "OFF" });
    expect(service.enqueueCalls).toBe(0);
    expect(root.querySelector("#mode-error")?.textContent).toContain("select a station");
  });

  it("disables pump toggles while the station is OFF", async () => {
    service.records.set("ST01", [record("ST01", { mode: "OFF" })]);
    await app.selectStation("ST01");
    expect(root.querySelector<HTMLButtonElement>("#send-pump")?.disabled).toBe(true);
    expect(root.querySelector<HTMLSelectElement>("#pump-index")?.disabled).toBe(true);
    expect(root.querySelector<HTMLButtonElement>("#send-mode")?.disabled).toBe(false);
  });

  it("shows a retry banner on failure and keeps the last content", async () => {
    await app.refresh();
    service.failing = true;
    expect(await app.refresh()).toBe(false);
    expect(root.querySelector(".banner-error")?.textContent).toContain("retrying");
    expect(root.querySelectorAll(".station-row")).toHaveLength(1); // content retained
    service.failing = false;
    await app.refresh();
    expect(root.querySelector(".banner-error")).toBeNull();
  });

  it("keeps operator edits and focus across refreshes", async () => {
    await app.selectStation("ST01");
    const input = root.querySelector<HTMLInputElement>("#setpoint-value")!;
    input.value = "61.";
    input.focus();
    service.records.get("ST01")!.push(record("ST01", { seq: 2, timestamp: 101 }));
    await app.refresh();
    expect(input.value).toBe("61.");
    expect(document.activeElement).toBe(input);
  });

  it("marks stale stations in the overview", async () => {
    const stale = new DashboardApp(
      root,
      new ApiClient("http://fake", service.fetch),
      { pollPeriodS: 2, pushPeriodS: 1 },
      () => 200, // 100 s after the last record at 1 s push period
    );
    await stale.refresh();
    expect(root.querySelector(".badge-stale")).not.toBeNull();
  });
});
