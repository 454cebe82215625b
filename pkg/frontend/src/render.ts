/**
 * Pure HTML renderers.
 *
 * Every function here maps already-fetched API data to an HTML string; none
 * of them fetch or compute domain values.  Numbers are the server's values
 * formatted for display — the single derived figure (the SOC delta on a
 * compare card) is labeled as display-only.
 */

import type { CountyCard } from "./compare.js";
import type {
  ChatResponse,
  CountyRecord,
  PersonaInfo,
  SupportHit,
  TraceEntry,
} from "./types.js";

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function formatJson(value: unknown): string {
  return JSON.stringify(value, null, 1) ?? "null";
}

/** SOC percentages ship with two decimals; render them that way. */
function formatSoc(value: number | null): string {
  return value === null ? "—" : value.toFixed(2);
}

/** Tillage scale is a tenth-step fraction; one decimal keeps 0 as "0.0". */
function formatTillage(value: number | null): string {
  return value === null ? "—" : value.toFixed(1);
}

function formatAcres(value: number | null): string {
  return value === null ? "" : ` · ${value.toLocaleString("en-US")} acres`;
}

// -- persona picker -----------------------------------------------------------

export function renderPersonaOptions(
  personas: PersonaInfo[],
  selected: string,
): string {
  return personas
    .map((p) => {
      const chosen = p.role === selected ? " selected" : "";
      const role = escapeHtml(p.role);
      return `<option value="${role}"${chosen}>${role}</option>`;
    })
    .join("");
}

// -- tool-call trace ----------------------------------------------------------

/**
 * Render a transcript's tool trace: one entry per tool_call/tool_result
 * pair, in execution order, with the arguments and the verbatim result.
 */
export function renderTrace(trace: TraceEntry[]): string {
  if (trace.length === 0) {
    return `<p class="trace-empty">No tools were called.</p>`;
  }
  const items = trace.map((entry) => {
    const outcome = entry.error
      ? `<pre class="trace-outcome" data-kind="error">${escapeHtml(
          formatJson(entry.error),
        )}</pre>`
      : `<pre class="trace-outcome" data-kind="result">${escapeHtml(
          formatJson(entry.result),
        )}</pre>`;
    return (
      `<li class="trace-entry" data-call-id="${escapeHtml(entry.call_id)}"` +
      ` data-tool="${escapeHtml(entry.name)}">` +
      `<span class="trace-name">${escapeHtml(entry.name)}</span>` +
      `<span class="trace-call-id">${escapeHtml(entry.call_id)}</span>` +
      `<pre class="trace-args">${escapeHtml(formatJson(entry.arguments))}</pre>` +
      outcome +
      `</li>`
    );
  });
  return `<ol class="trace">${items.join("")}</ol>`;
}

function citationsFrom(trace: TraceEntry[]): string[] {
  const seen = new Set<string>();
  for (const entry of trace) {
    if (entry.name !== "support_arguments" || entry.result === undefined) {
      continue;
    }
    const hits = (entry.result as { results?: SupportHit[] }).results ?? [];
    for (const hit of hits) {
      seen.add(hit.citation);
    }
  }
  return [...seen];
}

// -- chat exchanges -----------------------------------------------------------

export function renderExchange(prompt: string, response: ChatResponse): string {
  const truncated = response.truncated
    ? `<span class="badge badge-truncated">stopped at the tool-call limit</span>`
    : "";
  const citations = citationsFrom(response.tool_trace);
  const sources = citations.length
    ? `<div class="sources"><h4>Retrieved citations</h4><ul>` +
      citations.map((c) => `<li>${escapeHtml(c)}</li>`).join("") +
      `</ul></div>`
    : "";
  const trace = response.tool_trace.length
    ? `<details class="trace-details"><summary>` +
      `Tool trace (${response.tool_trace.length} calls)</summary>` +
      renderTrace(response.tool_trace) +
      `</details>`
    : "";
  return (
    `<div class="exchange" data-transcript-id="${escapeHtml(response.transcript_id)}">` +
    `<div class="bubble bubble-user">${escapeHtml(prompt)}</div>` +
    `<div class="bubble bubble-assistant">` +
    `<span class="role-label">${escapeHtml(response.persona)}</span>${truncated}` +
    `<p class="answer">${escapeHtml(response.answer)}</p>` +
    sources +
    trace +
    `</div></div>`
  );
}

export function renderChatError(detail: string): string {
  return `<div class="bubble bubble-error">${escapeHtml(detail)}</div>`;
}

// -- county compare cards -------------------------------------------------------

export function renderCompareCard(card: CountyCard): string {
  const socDelta = card.soc.soc_2023_pct - card.soc.soc_2016_pct;
  const sign = socDelta >= 0 ? "+" : "";
  const droughtRows = card.drought.events
    .map((e) => {
      const span =
        e.year_start === e.year_end
          ? String(e.year_start)
          : `${e.year_start}–${e.year_end}`;
      return `<li>${escapeHtml(span)} · ${escapeHtml(e.category)}</li>`;
    })
    .join("");
  const fireRows = card.wildfires.incidents
    .map(
      (w) =>
        `<li>${w.year} · ${escapeHtml(w.incident_name)}${formatAcres(w.acres)}</li>`,
    )
    .join("");
  const source = card.tillage.source
    ? ` <span class="badge badge-source">${escapeHtml(card.tillage.source)}</span>`
    : "";
  return (
    `<article class="county-card" data-county="${escapeHtml(card.county)}">` +
    `<h3>${escapeHtml(card.county)}</h3>` +
    `<dl>` +
    `<dt>SOC 2016</dt><dd class="soc-2016">${formatSoc(card.soc.soc_2016_pct)}%</dd>` +
    `<dt>SOC 2023</dt><dd class="soc-2023">${formatSoc(card.soc.soc_2023_pct)}%</dd>` +
    `<dt>Δ (display-only)</dt><dd class="soc-delta">${sign}${socDelta.toFixed(2)}</dd>` +
    `<dt>Tillage scale (${card.tillage.year})</dt>` +
    `<dd class="tillage">${formatTillage(card.tillage.tillage_scale)}${source}</dd>` +
    `</dl>` +
    `<h4>Drought timeline</h4>` +
    `<ul class="drought-timeline">${droughtRows || "<li>none recorded</li>"}</ul>` +
    `<h4>Wildfires (${card.wildfires.incidents.length})</h4>` +
    `<ul class="wildfire-list">${fireRows || "<li>none recorded</li>"}</ul>` +
    `<button type="button" class="detail-btn" data-county="${escapeHtml(card.county)}">` +
    `Full record</button>` +
    `<div class="county-detail"></div>` +
    `</article>`
  );
}

export function renderCompareError(county: string, detail: string): string {
  return (
    `<article class="county-card county-card-error" data-county="${escapeHtml(county)}">` +
    `<h3>${escapeHtml(county)}</h3>` +
    `<p class="inline-error">${escapeHtml(detail)}</p>` +
    `</article>`
  );
}

export function renderCountyDetail(record: CountyRecord): string {
  const crops = record.crops
    .map((year) => {
      const entries = year.crops
        .map((c) => {
          const share =
            c.area_fraction === null ? "" : ` (${c.area_fraction})`;
          return `<li>${escapeHtml(c.name)}${share}</li>`;
        })
        .join("");
      return `<li>${year.year}<ul>${entries}</ul></li>`;
    })
    .join("");
  const farms = record.farms
    .map(
      (f) =>
        `<li>${escapeHtml(f.farm_name)} · ${escapeHtml(f.practice)} ` +
        `(${f.year_implemented}, ${escapeHtml(f.funding_status)})</li>`,
    )
    .join("");
  return (
    `<h4>Crops by year</h4><ul class="crop-list">${crops || "<li>none recorded</li>"}</ul>` +
    `<h4>Enrolled farms</h4><ul class="farm-list">${farms || "<li>none recorded</li>"}</ul>`
  );
}

// -- service banner -------------------------------------------------------------

export function renderBanner(message: string): string {
  return (
    `<span class="banner-message">${escapeHtml(message)}</span>` +
    `<button type="button" class="banner-retry">Retry</button>`
  );
}
