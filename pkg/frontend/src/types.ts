export type EventKind =
  | "Thought"
  | "IntentIdentified"
  | "DelegationIssued"
  | "ToolInvoked"
  | "ToolCompleted"
  | "FindingReceived"
  | "VerificationNote"
  | "FinalBriefing"
  | "SourcesListed"
  | "Error";

export type Origin = "WHO" | "CDC" | "PubMed";

export interface Citation {
  url: string;
  title: string;
  origin: Origin;
}

export interface StreamEventEnvelope {
  session_id: string;
  seq: number;
  kind: EventKind;
  agent_id: string | null;
  at: string;
  payload: Record<string, unknown>;
}

export interface ScenarioModel {
  model_id: string;
  temperature: number;
  temperature_fixed: boolean;
}

export interface ScenarioSummary {
  scenario_id: string;
  name: string;
  manager: ScenarioModel;
  agents: Record<string, ScenarioModel>;
}

/** One timeline row per received event, ordered by seq. */
export interface TimelineEntry {
  seq: number;
  kind: EventKind;
  agentLabel: string;
  text: string;
  links?: Citation[];
}

export interface ConsoleState {
  entries: TimelineEntry[];
  /** Highest applied sequence number; -1 before the first event. */
  lastSeq: number;
  briefingMarkdown: string | null;
  sources: Citation[];
  /** Failure banner text; the timeline stays visible. */
  error: string | null;
  /** Set when a gap was detected: resubscribe from this seq. */
  resubscribeFrom: number | null;
  /** Exactly the data lines as received, untouched. */
  rawTrace: string[];
  terminal: boolean;
}
