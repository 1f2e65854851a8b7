/**
 * Live job console model.  Consumes the server-sent event stream, renders
 * lines in strict seq order, resumes from the last seen seq after a
 * disconnect (never duplicating), and freezes with a badge on the terminal
 * status event.
 */

import { isTerminalJobStatus } from "./fsm";
import type { JobEvent } from "./types";

/** Pull-based event subscription: yields events from a given seq onwards. */
export type EventSubscriber = (
  fromSeq: number,
) => AsyncIterable<JobEvent> | Iterable<JobEvent>;

export function renderEventLine(ev: JobEvent): string {
  // matches the engine CLI's --watch rendering so logs are comparable
  if (ev.kind === "stdout" || ev.kind === "stderr") return ev.payload;
  return `[${ev.kind}] ${ev.payload}`;
}

export class ConsoleModel {
  lines: string[] = [];
  nextSeq = 0;
  terminalBadge: string | null = null;
  connectionLost = false;

  /** Accept one event; duplicates and out-of-order arrivals are rejected. */
  offer(ev: JobEvent): boolean {
    if (this.terminalBadge !== null) return false;
    if (ev.seq < this.nextSeq) return false; // duplicate after reconnect
    if (ev.seq > this.nextSeq) {
      throw new Error(`event gap: expected seq ${this.nextSeq}, got ${ev.seq}`);
    }
    this.lines.push(renderEventLine(ev));
    this.nextSeq = ev.seq + 1;
    if (ev.kind === "status" && isTerminalJobStatus(ev.payload)) {
      this.terminalBadge = ev.payload;
    }
    return true;
  }

  get frozen(): boolean {
    return this.terminalBadge !== null;
  }

  /**
   * Consume a subscriber until the terminal event, reconnecting from
   * nextSeq whenever the stream drops.
   */
  async follow(subscribe: EventSubscriber, maxReconnects = 1000) {
    let attempts = 0;
    while (!this.frozen && attempts <= maxReconnects) {
      this.connectionLost = false;
      try {
        for await (const ev of toAsync(subscribe(this.nextSeq))) {
          this.offer(ev);
          if (this.frozen) return;
        }
      } catch {
        this.connectionLost = true;
      }
      attempts += 1;
    }
  }
}

async function* toAsync(
  it: AsyncIterable<JobEvent> | Iterable<JobEvent>,
): AsyncIterable<JobEvent> {
  yield* it as AsyncIterable<JobEvent>;
}

/** Parse one SSE frame body ("data: {...}") into a JobEvent. */
export function parseSseFrame(frame: string): JobEvent | null {
  const line = frame
    .split("\n")
    .find((l) => l.startsWith("data: "));
  if (!line) return null;
  return JSON.parse(line.slice("data: ".length)) as JobEvent;
}
