// Dashboard controller: owns the polling loop, selection, and command
// tracking. The command panel is static DOM that is never re-rendered, so
// in-flight operator edits are never clobbered by a refresh; only the
// data sections (overview, detail, status chips) are replaced.

import { ApiClient, ApiError } from "./api.js";
import type { CommandSpec, TelemetryRecord } from "./api.js";
import { LatestWins, backoffDelayS, buildOverview } from "./model.js";
import { renderBanner, renderCommandStatus, renderDetail, renderOverview } from "./render.js";
import { validateCommand } from "./validate.js";

export interface AppConfig {
  pollPeriodS: number;
  pushPeriodS: number; // assumed station push period, drives the stale badge
  windowS: number;
  commandTimeoutS: number;
}

const DEFAULTS: AppConfig = {
  pollPeriodS: 2,
  pushPeriodS: 1,
  windowS: 300,
  commandTimeoutS: 15,
};

const TO_CAP = Number.MAX_SAFE_INTEGER;

const SKELETON = `
  <div id="banner-area"></div>
  <section id="overview-section">
    <h2>Fleet</h2>
    <div id="overview"></div>
  </section>
  <section id="detail-section">
    <div class="detail-controls">
      window
      <select id="window-select">
        <option value="60">last 60 s</option>
        <option value="300" selected>last 5 min</option>
        <option value="3600">last hour</option>
        <option value="0">everything</option>
      </select>
    </div>
    <div id="detail"><p class="empty-state">Select a station.</p></div>
  </section>
  <section id="command-section">
    <h2>Commands <span id="command-target">(no station selected)</span></h2>
    <div class="command-group">
      <label>mode
        <select id="mode-select">
          <option>AUTO</option><option>MANUAL</option><option>OFF</option>
        </select>
      </label>
      <button id="send-mode" class="cmd-button">set mode</button>
      <span class="inline-error" id="mode-error"></span>
    </div>
    <div class="command-group">
      <label>pump
        <select id="pump-index" class="pump-control">
          ${Array.from({ length: 8 }, (_, i) => `<option>${i}</option>`).join("")}
        </select>
      </label>
      <label>state
        <select id="pump-value" class="pump-control"><option value="1">on</option><option value="0">off</option></select>
      </label>
      <button id="send-pump" class="cmd-button pump-control">set pump</button>
      <span class="inline-error" id="pump-error"></span>
    </div>
    <div class="command-group">
      <label>setpoint
        <select id="setpoint-index">
          ${Array.from({ length: 8 }, (_, i) => `<option>${i}</option>`).join("")}
        </select>
      </label>
      <input id="setpoint-value" value="55.0" size="7">
      <button id="send-setpoint" class="cmd-button">set setpoint</button>
      <span class="inline-error" id="setpoint-error"></span>
    </div>
    <div id="command-status"></div>
  </section>
`;

export class DashboardApp {
  readonly config: AppConfig;
  selected: string | null = null;
  failures = 0;

  private readonly overviewGate = new LatestWins();
  private readonly detailGate = new LatestWins();
  private tracked: number[] = [];
  private trackingSince = 0;
  private running = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private latestMode: string | null = null;

  constructor(
    readonly root: HTMLElement,
    readonly api: ApiClient,
    config: Partial<AppConfig> = {},
    readonly now: () => number = () => Date.now() / 1000,
  ) {
    this.config = { ...DEFAULTS, ...config };
    this.mount();
  }

  private element<T extends HTMLElement>(id: string): T {
    const found = this.root.querySelector(`#${id}`);
    if (!found) {
      throw new Error(`missing element #${id}`);
    }
    return found as T;
  }

  private mount(): void {
    this.root.innerHTML = SKELETON;
    this.element("overview").addEventListener("click", (event) => {
      const row = (event.target as HTMLElement).closest<HTMLElement>(".station-row");
      if (row?.dataset.station) {
        void this.selectStation(row.dataset.station);
      }
    });
    this.element("window-select").addEventListener("change", () => {
      void this.refresh();
    });
    this.element("send-mode").addEventListener("click", () => {
      const mode = this.element<HTMLSelectElement>("mode-select").value;
      void this.submitCommand({ kind: "SETMODE", mode });
    });
    this.element("send-pump").addEventListener("click", () => {
      const index = parseInt(this.element<HTMLSelectElement>("pump-index").value, 10);
      const value = this.element<HTMLSelectElement>("pump-value").value === "1" ? 1 : 0;
      void this.submitCommand({ kind: "SETPUMP", index, value });
    });
    this.element("send-setpoint").addEventListener("click", () => {
      const index = parseInt(this.element<HTMLSelectElement>("setpoint-index").value, 10);
      const value = this.element<HTMLInputElement>("setpoint-value").value;
      void this.submitCommand({ kind: "SETSETPOINT", index, value });
    });
  }

  async selectStation(station: string): Promise<void> {
    this.selected = station;
    this.element("command-target").textContent = `for ${station}`;
    await this.refresh();
  }

  windowSeconds(): number {
    return parseInt(this.element<HTMLSelectElement>("window-select").value, 10);
  }

  async refresh(): Promise<boolean> {
    try {
      await this.refreshOverview();
      if (this.selected !== null) {
        await this.refreshDetail(this.selected);
        await this.refreshCommandStatus();
      }
      this.failures = 0;
      this.element("banner-area").innerHTML = "";
      return true;
    } catch (error) {
      // keep the last rendered content; show a retry banner instead
      this.failures += 1;
      const delay = backoffDelayS(this.failures, this.config.pollPeriodS);
      this.element("banner-area").innerHTML = renderBanner(
        "error",
        `Connection problem (${String(error)}) - retrying in ${delay} s`,
      );
      return false;
    }
  }

  private async refreshOverview(): Promise<void> {
    const token = this.overviewGate.issue();
    const summaries = await this.api.stations();
    const latests = new Map<string, TelemetryRecord>();
    await Promise.all(
      summaries.map(async (summary) => {
        try {
          latests.set(summary.station, await this.api.latest(summary.station));
        } catch (error) {
          if (!(error instanceof ApiError && error.status === 404)) {
            throw error;
          }
        }
      }),
    );
    if (this.overviewGate.tryApply(token)) {
      const views = buildOverview(summaries, latests, this.now(), this.config.pushPeriodS);
      this.element("overview").innerHTML = renderOverview(views);
    }
  }

  private async refreshDetail(station: string): Promise<void> {
    const token = this.detailGate.issue();
    const windowS = this.windowSeconds();
    const from = windowS === 0 ? 0 : Math.max(0, Math.floor(this.now() - windowS));
    let records: TelemetryRecord[] | "unknown";
    try {
      records = await this.api.range(station, from, TO_CAP);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        records = "unknown";
      } else {
        throw error;
      }
    }
    if (this.detailGate.tryApply(token)) {
      this.element("detail").innerHTML = renderDetail(station, records);
      this.latestMode =
        records !== "unknown" && records.length > 0
          ? records[records.length - 1]?.mode ?? null
          : null;
      this.applyControlState();
    }
  }

  private async refreshCommandStatus(): Promise<void> {
    if (this.selected === null) {
      return;
    }
    const statuses = await this.api.commandStatus(this.selected);
    const mine = statuses.filter((s) => this.tracked.includes(s.id));
    this.element("command-status").innerHTML = renderCommandStatus(mine);
    const terminal = mine.every((s) => s.state === "ACKED" || s.state === "EXPIRED");
    const timedOut = this.now() - this.trackingSince > this.config.commandTimeoutS;
    if (this.tracked.length > 0 && ((mine.length === this.tracked.length && terminal) || timedOut)) {
      this.tracked = [];
      this.applyControlState();
    }
  }

  // Pump toggles are disabled in OFF mode; everything is disabled while a
  // command is in flight for the selected station.
  private applyControlState(): void {
    const busy = this.tracked.length > 0;
    const pumpLocked = this.latestMode === "OFF";
    for (const button of this.root.querySelectorAll<HTMLButtonElement>(".cmd-button")) {
      button.disabled = busy;
    }
    for (const control of this.root.querySelectorAll<HTMLButtonElement>(".pump-control")) {
      control.disabled = busy || pumpLocked;
    }
  }

  private errorElementFor(kind: CommandSpec["kind"]): HTMLElement {
    const id = kind === "SETMODE" ? "mode-error" : kind === "SETPUMP" ? "pump-error" : "setpoint-error";
    return this.element(id);
  }

  async submitCommand(spec: CommandSpec): Promise<void> {
    const errorElement = this.errorElementFor(spec.kind);
    errorElement.textContent = "";
    if (this.selected === null) {
      errorElement.textContent = "select a station first";
      return;
    }
    const invalid = validateCommand(spec);
    if (invalid !== null) {
      errorElement.textContent = invalid; // blocked client-side, no request sent
      return;
    }
    try {
      const { id } = await this.api.enqueue(this.selected, spec);
      this.tracked.push(id);
      this.trackingSince = this.now();
      this.applyControlState();
      await this.refreshCommandStatus();
    } catch (error) {
      if (error instanceof ApiError) {
        errorElement.textContent = `rejected by server: ${error.message}`;
      } else {
        errorElement.textContent = `send failed: ${String(error)}`;
      }
    }
  }

  start(): void {
    this.running = true;
    const loop = async () => {
      if (!this.running) {
        return;
      }
      const ok = await this.refresh();
      const delayS = ok ? this.config.pollPeriodS : backoffDelayS(this.failures, this.config.pollPeriodS);
      this.timer = setTimeout(loop, delayS * 1000);
    };
    void loop();
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }
}
