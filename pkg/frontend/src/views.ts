// Pure render helpers: state in, HTML string out. All rendered numbers come
// from server responses; nothing here re-derives memory state.

import { CardStats, HistoryEntry, Ticket } from "./api.js";

const clamp01 = (x: number) => Math.min(1, Math.max(0, x));

export function escapeHtml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;")
    .replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

/** Horizontal recall-probability gauge; width tracks m in [0, 1]. */
export function renderGauge(m: number): string {
  const pct = Math.round(clamp01(m) * 100);
  return `<div class="gauge" role="meter" aria-valuenow="${pct}">` +
    `<div class="gauge-fill" style="width:${pct}%"></div>` +
    `<span class="gauge-label">m = ${clamp01(m).toFixed(2)}</span></div>`;
}

/** SVG polyline through the server-reported n values after each review. */
export function renderSparkline(values: number[], width = 120,
                                height = 30): string {
  if (values.length === 0) {
    return `<svg class="spark" width="${width}" height="${height}"></svg>`;
  }
  const max = Math.max(...values, 1e-12);
  const step = values.length > 1 ? width / (values.length - 1) : 0;
  const pts = values.map((v, i) => {
    const x = (i * step).toFixed(1);
    const y = (height - (v / max) * (height - 2) - 1).toFixed(1);
    return `${x},${y}`;
  }).join(" ");
  return `<svg class="spark" width="${width}" height="${height}">` +
    `<polyline fill="none" stroke="currentColor" points="${pts}"/></svg>`;
}

/** One marker per server event, in log order: tall tick for success,
 *  short for failure. */
export function renderHistoryStrip(history: HistoryEntry[]): string {
  const marks = history.map(h =>
    `<span class="mark ${h.recall ? "hit" : "miss"}" ` +
    `data-at="${h.at}">${h.recall ? "✓" : "✗"}</span>`).join("");
  return `<div class="history" data-events="${history.length}">` +
    `${marks}</div>`;
}

export function formatCountdown(ms: number): string {
  if (ms <= 0) return "due now";
  const s = Math.ceil(ms / 1000);
  if (s < 60) return `${s}s`;
  if (s < 3600) return `${Math.floor(s / 60)}m ${s % 60}s`;
  const h = Math.floor(s / 3600);
  if (h < 48) return `${h}h ${Math.floor((s % 3600) / 60)}m`;
  return `${Math.floor(h / 24)}d ${h % 24}h`;
}

/** Due card: prompt plus self-grading buttons. The learner grades their
 *  own recall; the answer itself is never typed. */
export function renderReviewCard(card: CardStats, ticket: Ticket): string {
  return `<section class="card" data-item="${escapeHtml(card.item_id)}">` +
    `<h2>${escapeHtml(card.item_id)}</h2>` +
    renderGauge(card.m) +
    renderHistoryStrip(card.history) +
    `<p class="sched">intensity ${card.intensity.toFixed(3)}/day, ` +
    `ticket ${escapeHtml(ticket.ticket_id)}</p>` +
    `<button class="grade" data-recall="1">I remembered</button>` +
    `<button class="grade" data-recall="0">I forgot</button>` +
    `</section>`;
}

/** Nothing due yet: countdown to the earliest sampled review time. */
export function renderIdle(ticket: Ticket | null, now: number): string {
  if (ticket === null) {
    return `<section class="idle"><p>Deck is empty.</p></section>`;
  }
  const wait = formatCountdown(ticket.proposed_time * 1000 - now);
  return `<section class="idle">` +
    `<p>Next: <b>${escapeHtml(ticket.item_id)}</b> in ` +
    `<span class="countdown">${wait}</span></p></section>`;
}

/** Per-card dashboard row: server m, n, intensity, review count, history. */
export function renderDashboard(cards: CardStats[],
                                nTrends: Map<string, number[]>): string {
  if (cards.length === 0) {
    return `<table class="dash"><tbody></tbody></table>`;
  }
  const rows = cards.map(c => {
    const trend = nTrends.get(c.item_id) ?? [];
    return `<tr data-item="${escapeHtml(c.item_id)}">` +
      `<td>${escapeHtml(c.item_id)}</td>` +
      `<td>${renderGauge(c.m)}</td>` +
      `<td>n=${c.n.toPrecision(3)} ${renderSparkline(trend)}</td>` +
      `<td>${c.intensity.toFixed(3)}/day</td>` +
      `<td>${c.reviews}</td>` +
      `<td>${renderHistoryStrip(c.history)}</td></tr>`;
  }).join("");
  return `<table class="dash"><tbody>${rows}</tbody></table>`;
}
