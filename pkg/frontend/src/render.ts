// Pure HTML/SVG renderers. Every telemetry number shown is the verbatim
// string (or 0/1 integer) received from the service; floats are parsed
// only to position chart geometry, never to reformat displayed values.

import type { CommandStatus, TelemetryRecord } from "./api.js";
import type { StationView } from "./model.js";

const SERIES_COLORS = [
  "#e6194b", "#3cb44b", "#ffb000", "#4363d8",
  "#f58231", "#911eb4", "#46f0f0", "#808000",
];

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBanner(kind: "error" | "info", text: string): string {
  return `<div class="banner banner-${kind}" role="alert">${escapeHtml(text)}</div>`;
}

export function renderOverview(views: StationView[]): string {
  if (views.length === 0) {
    return `<p class="empty-state">No stations have reported yet.</p>`;
  }
  const rows = views
    .map((view) => {
      const stale = view.stale ? `<span class="badge badge-stale">stale</span>` : "";
      const mode = view.latest ? view.latest.mode : "?";
      const pumpsOn = view.latest ? view.latest.pumps.filter((p) => p === 1).length : 0;
      return (
        `<tr class="station-row" data-station="${escapeHtml(view.id)}">` +
        `<td class="station-id">${escapeHtml(view.id)} ${stale}</td>` +
        `<td class="station-mode">${mode}</td>` +
        `<td>${pumpsOn}/8</td>` +
        `<td>${view.lastReceivedAt}</td>` +
        `<td>${view.pendingCommands}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="overview-table"><thead><tr>` +
    `<th>station</th><th>mode</th><th>pumps on</th><th>last seen</th><th>pending</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

function chartPoints(records: TelemetryRecord[], channel: number, x: (t: number) => number, y: (v: number) => number): string {
  const line = records
    .map((r) => `${x(r.timestamp).toFixed(1)},${y(parseFloat(r.temps[channel] ?? "0")).toFixed(1)}`)
    .join(" ");
  const dots = records
    .map(
      (r) =>
        `<circle class="chart-point" data-channel="${channel}" data-seq="${r.seq}" ` +
        `data-value="${escapeHtml(r.temps[channel] ?? "")}" ` +
        `cx="${x(r.timestamp).toFixed(1)}" cy="${y(parseFloat(r.temps[channel] ?? "0")).toFixed(1)}" r="2.5" ` +
        `fill="${SERIES_COLORS[channel]}"><title>t${channel}=${escapeHtml(r.temps[channel] ?? "")}</title></circle>`,
    )
    .join("");
  return `<polyline fill="none" stroke="${SERIES_COLORS[channel]}" stroke-width="1.5" points="${line}"/>${dots}`;
}

export function renderTempChart(records: TelemetryRecord[], width = 640, height = 240): string {
  const pad = 30;
  if (records.length === 0) {
    return `<svg class="temp-chart" viewBox="0 0 ${width} ${height}"><text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="chart-empty">no data in range</text></svg>`;
  }
  const times = records.map((r) => r.timestamp);
  const values = records.flatMap((r) => r.temps.map(parseFloat));
  const tMin = Math.min(...times);
  const tMax = Math.max(...times);
  const vMin = Math.min(...values);
  const vMax = Math.max(...values);
  const tSpan = tMax - tMin || 1;
  const vSpan = vMax - vMin || 1;
  const x = (t: number) => pad + ((t - tMin) / tSpan) * (width - 2 * pad);
  const y = (v: number) => height - pad - ((v - vMin) / vSpan) * (height - 2 * pad);
  const series = Array.from({ length: 8 }, (_, channel) => chartPoints(records, channel, x, y)).join("");
  const axis =
    `<text x="2" y="${y(vMax) + 4}" class="axis-label">${vMax}</text>` +
    `<text x="2" y="${y(vMin) + 4}" class="axis-label">${vMin}</text>`;
  return `<svg class="temp-chart" viewBox="0 0 ${width} ${height}">${axis}${series}</svg>`;
}

function renderPumpCells(record: TelemetryRecord | null): string {
  return Array.from({ length: 8 }, (_, i) => {
    const value = record ? record.pumps[i] ?? 0 : 0;
    const cls = value === 1 ? "pump-on" : "pump-off";
    return `<span class="pump-cell ${cls}" data-pump-index="${i}">P${i}:${value === 1 ? "on" : "off"}</span>`;
  }).join(" ");
}

function renderRecordRows(records: TelemetryRecord[], tail = 20): string {
  return records
    .slice(-tail)
    .map(
      (r) =>
        `<tr data-seq="${r.seq}"><td>${r.timestamp}</td><td>${r.seq}</td><td>${r.mode}</td>` +
        r.temps.map((t, i) => `<td class="temp-cell" data-channel="${i}">${escapeHtml(t)}</td>`).join("") +
        `<td>${r.pumps.join("")}</td></tr>`,
    )
    .join("");
}

export function renderDetail(station: string, records: TelemetryRecord[] | "unknown"): string {
  if (records === "unknown") {
    return `<div class="unknown-station">Unknown station: ${escapeHtml(station)}</div>`;
  }
  const latest = records.length > 0 ? records[records.length - 1] ?? null : null;
  const header =
    `<h2>${escapeHtml(station)}</h2>` +
    `<div class="detail-state">mode <span class="mode-badge" data-mode="${latest ? latest.mode : "?"}">` +
    `${latest ? latest.mode : "?"}</span> &middot; ${records.length} records &middot; ` +
    `<span class="pump-cells">${renderPumpCells(latest)}</span></div>`;
  const tempHeaders = Array.from({ length: 8 }, (_, i) => `<th>t${i}</th>`).join("");
  const table =
    `<table class="detail-table"><thead><tr><th>time</th><th>seq</th><th>mode</th>${tempHeaders}<th>pumps</th></tr></thead>` +
    `<tbody>${renderRecordRows(records)}</tbody></table>`;
  return header + renderTempChart(records) + table;
}

export function renderCommandStatus(statuses: CommandStatus[]): string {
  if (statuses.length === 0) {
    return "";
  }
  return statuses
    .map(
      (s) =>
        `<span class="command-chip" data-command-id="${s.id}" data-state="${s.state}">` +
        `#${s.id} ${s.kind} ${s.state}</span>`,
    )
    .join(" ");
}
