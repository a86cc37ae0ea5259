/**
 * Fetch-based SSE consumer for session event streams.
 *
 * The native EventSource cannot set headers or be steered by the
 * reducer, so this client parses event/id/data frames from a streamed
 * fetch body itself. It tracks the last delivered event id and resumes
 * with the standard Last-Event-ID header after a drop or when the
 * reducer detects a gap.
 */

export interface SseFrame {
  event: string;
  id: number | null;
  data: string;
}

export interface SseHandlers {
  onFrame: (frame: SseFrame) => void;
  onEnd: () => void;
  onError: (err: unknown) => void;
}

export function parseSseChunk(buffer: string): { frames: SseFrame[]; rest: string } {
  const frames: SseFrame[] = [];
  const blocks = buffer.split("\n\n");
  const rest = blocks.pop() ?? "";
  for (const block of blocks) {
    if (!block.trim()) continue;
    let event = "message";
    let id: number | null = null;
    let data = "";
    for (const line of block.split("\n")) {
      if (line.startsWith("event: ")) event = line.slice(7);
      else if (line.startsWith("id: ")) id = Number(line.slice(4));
      else if (line.startsWith("data: ")) data = line.slice(6);
    }
    frames.push({ event, id, data });
  }
  return { frames, rest };
}

export class SseClient {
  private lastId: number | null = null;
  private aborter: AbortController | null = null;
  private closed = false;

  constructor(
    private url: string,
    private handlers: SseHandlers,
  ) {}

  async connect(fromSeq?: number): Promise<void> {
    this.aborter?.abort();
    this.aborter = new AbortController();
    const headers: Record<string, string> = {};
    if (fromSeq !== undefined && fromSeq > 0) {
      headers["Last-Event-ID"] = String(fromSeq - 1);
    } else if (this.lastId !== null) {
      headers["Last-Event-ID"] = String(this.lastId);
    }
    try {
      const response = await fetch(this.url, { headers, signal: this.aborter.signal });
      if (!response.ok || !response.body) {
        throw new Error(`stream request failed: ${response.status}`);
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { value, done } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        const { frames, rest } = parseSseChunk(buffer);
        buffer = rest;
        for (const frame of frames) {
          if (frame.id !== null) this.lastId = frame.id;
          this.handlers.onFrame(frame);
        }
      }
      if (!this.closed) this.handlers.onEnd();
    } catch (err) {
      if (this.closed) return;
      this.handlers.onError(err);
    }
  }

  close(): void {
    this.closed = true;
    this.aborter?.abort();
  }
}
