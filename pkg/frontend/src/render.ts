/**
 * Pure HTML string builders for the console panels. Kept DOM-free so
 * they run under vitest without a browser; main.ts assigns the results
 * via innerHTML. All interpolated text is escaped here.
 */

import type { Citation, TimelineEntry } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function truncateUrl(url: string, max = 60): string {
  return url.length <= max ? url : url.slice(0, max - 1) + "…";
}

/** Numbered source list with an origin badge per entry. */
export function renderSources(citations: Citation[]): string {
  if (citations.length === 0) {
    return '<p class="placeholder">no sources</p>';
  }
  const items = citations
    .map(
      (c) =>
        `<li><span class="badge badge-${c.origin.toLowerCase()}">${c.origin}</span> ` +
        `<a href="${escapeHtml(c.url)}" target="_blank" rel="noopener" title="${escapeHtml(c.url)}">` +
        `${escapeHtml(c.title)}</a> ` +
        `<span class="url">${escapeHtml(truncateUrl(c.url))}</span></li>`,
    )
    .join("");
  return `<ol class="sources">${items}</ol>`;
}

export function renderTimelineEntry(entry: TimelineEntry): string {
  const links = entry.links?.length
    ? ` <span class="entry-links">[${entry.links.length} link${entry.links.length > 1 ? "s" : ""}]</span>`
    : "";
  return (
    `<li class="entry entry-${entry.kind.toLowerCase()}">` +
    `<span class="seq">${entry.seq}</span>` +
    `<span class="kind">${entry.kind}</span>` +
    `<span class="agent">${escapeHtml(entry.agentLabel)}</span>` +
    `<span class="text">${escapeHtml(entry.text)}</span>${links}</li>`
  );
}

export function renderTimeline(entries: TimelineEntry[]): string {
  return `<ul class="timeline">${entries.map(renderTimelineEntry).join("")}</ul>`;
}
