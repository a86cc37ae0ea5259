/** Console wiring: query form, live timeline, briefing and sources panels. */

import { createSession, eventsUrl, listScenarios } from "./api.js";
import { renderMarkdown } from "./markdown.js";
import { initialState, reduceEvent, validateQuery } from "./reducer.js";
import { escapeHtml, renderSources, renderTimeline } from "./render.js";
import { SseClient } from "./sse.js";
import type { ConsoleState, StreamEventEnvelope } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

let state: ConsoleState = initialState;
let client: SseClient | null = null;

function renderState(): void {
  $("timeline").innerHTML = renderTimeline(state.entries);
  const timeline = $("timeline");
  timeline.scrollTop = timeline.scrollHeight;

  if (state.briefingMarkdown !== null) {
    $("briefing").innerHTML = renderMarkdown(state.briefingMarkdown);
  }
  $("sources").innerHTML = renderSources(state.sources);
  $("rawtrace").textContent = state.rawTrace.join("\n");

  const banner = $("banner");
  if (state.error) {
    banner.innerHTML =
      `<span>${escapeHtml(state.error)}</span> ` +
      '<button id="retry">retry</button>';
    banner.classList.remove("hidden");
    document.getElementById("retry")?.addEventListener("click", () => submit());
  } else {
    banner.classList.add("hidden");
  }
}

function apply(evt: StreamEventEnvelope, raw: string): void {
  state = reduceEvent(state, evt, raw);
  if (state.resubscribeFrom !== null && client) {
    // Gap detected: resume from the last applied seq.
    void client.connect(state.resubscribeFrom);
  }
  renderState();
}

async function subscribe(sessionId: string): Promise<void> {
  client?.close();
  client = new SseClient(eventsUrl(sessionId), {
    onFrame: (frame) => {
      apply(JSON.parse(frame.data) as StreamEventEnvelope, frame.data);
    },
    onEnd: () => {
      if (!state.terminal && client) void client.connect();
    },
    onError: () => {
      if (!state.terminal && client) {
        setTimeout(() => client && void client.connect(), 500);
      }
    },
  });
  await client.connect();
}

async function submit(): Promise<void> {
  const input = $<HTMLTextAreaElement>("query");
  const problem = validateQuery(input.value);
  const validation = $("validation");
  if (problem) {
    validation.textContent = problem;
    return;
  }
  validation.textContent = "";
  state = initialState;
  renderState();
  $("briefing").innerHTML = '<p class="placeholder">investigation running…</p>';
  try {
    const scenario = $<HTMLSelectElement>("scenario").value;
    const sessionId = await createSession(input.value, scenario);
    await subscribe(sessionId);
  } catch (err) {
    state = { ...state, error: String(err) };
    renderState();
  }
}

async function init(): Promise<void> {
  const select = $<HTMLSelectElement>("scenario");
  try {
    const scenarios = await listScenarios();
    select.innerHTML = scenarios
      .map(
        (s) =>
          `<option value="${escapeHtml(s.scenario_id)}">` +
          `${escapeHtml(s.scenario_id)} — ${escapeHtml(s.name)}</option>`,
      )
      .join("");
  } catch (err) {
    state = { ...state, error: `backend unreachable: ${String(err)}` };
    renderState();
  }

  const input = $<HTMLTextAreaElement>("query");
  const button = $<HTMLButtonElement>("submit");
  const refresh = () => {
    button.disabled = validateQuery(input.value) !== null;
  };
  input.addEventListener("input", refresh);
  refresh();
  button.addEventListener("click", () => void submit());
  $("toggle-raw").addEventListener("click", () => {
    $("rawtrace").classList.toggle("hidden");
  });
}

void init();
