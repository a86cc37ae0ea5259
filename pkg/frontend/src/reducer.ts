/**
 * Pure state reducer over the session event stream.
 *
 * One timeline entry per received event; duplicates (seq already
 * applied) are ignored; a sequence gap does not apply the event but
 * requests a resubscribe from the first missing seq. FinalBriefing
 * switches the main panel to the rendered report; SourcesListed fills
 * the sources panel and ends the stream; Error raises the failure
 * banner while keeping the timeline intact.
 */

import type {
  Citation,
  ConsoleState,
  StreamEventEnvelope,
  TimelineEntry,
} from "./types.js";

export const initialState: ConsoleState = {
  entries: [],
  lastSeq: -1,
  briefingMarkdown: null,
  sources: [],
  error: null,
  resubscribeFrom: null,
  rawTrace: [],
  terminal: false,
};

function describe(evt: StreamEventEnvelope): string {
  const p = evt.payload as Record<string, any>;
  switch (evt.kind) {
    case "Thought":
      return String(p.text ?? "");
    case "IntentIdentified":
      return String(p.intent ?? "");
    case "DelegationIssued":
      return `${p.category}: ${p.instruction}`;
    case "ToolInvoked":
      return `calling ${p.tool}`;
    case "ToolCompleted":
      return `${p.tool} ${p.status}${p.summary ? ` (${p.summary})` : ""}`;
    case "FindingReceived":
      return `${p.risk_level}: ${String(p.summary ?? "").split("\n")[0]}`;
    case "VerificationNote":
      return String(p.note ?? "");
    case "FinalBriefing":
      return `briefing ready (${p.metrics?.words ?? "?"} words, ${p.metrics?.source_count ?? "?"} sources)`;
    case "SourcesListed":
      return `${(p.sources ?? []).length} sources listed`;
    case "Error":
      return String(p.message ?? "");
  }
}

function linksFor(evt: StreamEventEnvelope): Citation[] | undefined {
  const p = evt.payload as Record<string, any>;
  if (evt.kind === "FindingReceived" && Array.isArray(p.citations) && p.citations.length) {
    return p.citations as Citation[];
  }
  if (evt.kind === "SourcesListed" && Array.isArray(p.sources)) {
    return p.sources as Citation[];
  }
  return undefined;
}

export function reduceEvent(
  state: ConsoleState,
  evt: StreamEventEnvelope,
  rawData?: string,
): ConsoleState {
  if (evt.seq <= state.lastSeq) {
    return state; // duplicate delivery, ignore
  }
  if (evt.seq > state.lastSeq + 1) {
    // Gap: do not apply; ask the stream layer to resume from last seq.
    return { ...state, resubscribeFrom: state.lastSeq + 1 };
  }

  const entry: TimelineEntry = {
    seq: evt.seq,
    kind: evt.kind,
    agentLabel: evt.agent_id ?? "manager",
    text: describe(evt),
    links: linksFor(evt),
  };
  const next: ConsoleState = {
    ...state,
    entries: [...state.entries, entry],
    lastSeq: evt.seq,
    resubscribeFrom: null,
    rawTrace: rawData !== undefined ? [...state.rawTrace, rawData] : state.rawTrace,
  };

  switch (evt.kind) {
    case "FinalBriefing":
      return { ...next, briefingMarkdown: String((evt.payload as any).markdown ?? "") };
    case "SourcesListed":
      return {
        ...next,
        sources: ((evt.payload as any).sources ?? []) as Citation[],
        terminal: true,
      };
    case "Error":
      return { ...next, error: String((evt.payload as any).message ?? "error"), terminal: true };
    default:
      return next;
  }
}

export function replayTrace(
  state: ConsoleState,
  lines: string[],
): ConsoleState {
  let current = state;
  for (const line of lines) {
    if (!line.trim()) continue;
    current = reduceEvent(current, JSON.parse(line) as StreamEventEnvelope, line);
  }
  return current;
}

/** Client-side submit guard: blank queries never reach the backend. */
export function validateQuery(text: string): string | null {
  if (!text.trim()) {
    return "Enter a question before submitting.";
  }
  return null;
}
