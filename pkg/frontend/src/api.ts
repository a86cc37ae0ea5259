/** Thin wrappers over the four service endpoints. */

import type { ScenarioSummary } from "./types.js";

export const API_BASE = "";

export async function listScenarios(): Promise<ScenarioSummary[]> {
  const response = await fetch(`${API_BASE}/api/scenarios`);
  if (!response.ok) throw new Error(`scenario list failed: ${response.status}`);
  return (await response.json()) as ScenarioSummary[];
}

export async function createSession(
  query: string,
  scenarioId: string,
): Promise<string> {
  const response = await fetch(`${API_BASE}/api/sessions`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ query, scenario_id: scenarioId }),
  });
  if (!response.ok) {
    const detail = await response.text();
    throw new Error(`session create failed (${response.status}): ${detail}`);
  }
  return ((await response.json()) as { session_id: string }).session_id;
}

export function eventsUrl(sessionId: string): string {
  return `${API_BASE}/api/sessions/${sessionId}/events`;
}
