// Typed client for the heatdispatch service JSON endpoints.
// The dashboard consumes only these routes; nothing else exists for it.

export type Mode = "AUTO" | "MANUAL" | "OFF";

export interface StationSummary {
  station: string;
  last_received_at: number;
  pending_commands: number;
}

export interface TelemetryRecord {
  station: string;
  seq: number;
  timestamp: number;
  received_at: number;
  temps: string[]; // verbatim one-decimal strings, e.g. "55.0"
  pumps: number[]; // 0 | 1, eight entries
  mode: Mode;
}

export type CommandState = "PENDING" | "DELIVERED" | "ACKED" | "EXPIRED";

export interface CommandStatus {
  id: number;
  station: string;
  state: CommandState;
  created_at: number;
  kind: "SETMODE" | "SETPUMP" | "SETSETPOINT";
  mode?: Mode;
  index?: number;
  value?: string | number;
}

export type CommandSpec =
  | { kind: "SETMODE"; mode: string }
  | { kind: "SETPUMP"; index: number; value: 0 | 1 }
  | { kind: "SETSETPOINT"; index: number; value: string };

export class ApiError extends Error {
  constructor(readonly status: number, body: string) {
    super(`HTTP ${status}: ${body}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchFn: FetchLike;

  constructor(readonly baseUrl: string, fetchFn?: FetchLike) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private url(path: string, params: Record<string, string> = {}): string {
    const query = new URLSearchParams(params).toString();
    return `${this.baseUrl}${path}${query ? `?${query}` : ""}`;
  }

  private async getJson<T>(path: string, params: Record<string, string> = {}): Promise<T> {
    const response = await this.fetchFn(this.url(path, params));
    const body = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, body);
    }
    return JSON.parse(body) as T;
  }

  stations(): Promise<StationSummary[]> {
    return this.getJson("/stations");
  }

  latest(station: string): Promise<TelemetryRecord> {
    return this.getJson("/latest", { station });
  }

  range(station: string, from: number, to: number, limit = 1000): Promise<TelemetryRecord[]> {
    return this.getJson("/danni", {
      station,
      from: String(from),
      to: String(to),
      limit: String(limit),
    });
  }

  async enqueue(station: string, spec: CommandSpec): Promise<{ id: number; state: CommandState }> {
    const params: Record<string, string> = { station, kind: spec.kind };
    if (spec.kind === "SETMODE") {
      params.mode = spec.mode;
    } else {
      params.index = String(spec.index);
      params.value = String(spec.value);
    }
    const response = await this.fetchFn(this.url("/commands/enqueue"), {
      method: "POST",
      headers: { "Content-Type": "application/x-www-form-urlencoded" },
      body: new URLSearchParams(params).toString(),
    });
    const body = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, body);
    }
    return JSON.parse(body);
  }

  commandStatus(station: string, id?: number): Promise<CommandStatus[]> {
    const params: Record<string, string> = { station };
    if (id !== undefined) {
      params.id = String(id);
    }
    return this.getJson("/commands/status", params);
  }
}
