/** Sequenced event posting with offline buffering and conflict resync.
 *
 * Events queue locally in seq order and flush one at a time; the UI only
 * advances its view state when the server echoes the seq back. A 409 means
 * this client fell behind the authoritative log, so the queue drops its
 * buffer and asks the owner to resync from the snapshot.
 */

import { ApiClient, SequenceConflict } from "./api";
import type { EventAck, EventKind, EventRecord } from "./types";

export interface QueuedEvent {
  record: EventRecord;
  resolve: (ack: EventAck) => void;
  reject: (error: unknown) => void;
}

export class EventQueue {
  private buffer: QueuedEvent[] = [];
  private nextSeq: number;
  private flushing = false;

  constructor(
    private api: ApiClient,
    private sessionId: string,
    headSeq: number,
    private onConflict: (headSeq: number) => void,
    private clock: () => Date = () => new Date(),
  ) {
    this.nextSeq = headSeq + 1;
  }

  get pending(): number {
    return this.buffer.length;
  }

  get headSeq(): number {
    return this.nextSeq - 1;
  }

  /** Build and enqueue one event at the given playhead. */
  submit(
    kind: EventKind,
    node: string,
    offsetMs: number,
    payload: Record<string, unknown>,
  ): Promise<EventAck> {
    const record: EventRecord = {
      seq: this.nextSeq++,
      wall_time: this.clock().toISOString().replace(/(\.\d{3})\d*Z$/, "$1Z"),
      node,
      offset_ms: Math.max(0, Math.round(offsetMs)),
      kind,
      payload,
    };
    return new Promise<EventAck>((resolve, reject) => {
      this.buffer.push({ record, resolve, reject });
      void this.flush();
    });
  }

  /** Reset after a snapshot resync; buffered events are abandoned. */
  reset(headSeq: number): void {
    for (const item of this.buffer.splice(0)) {
      item.reject(new SequenceConflict(headSeq));
    }
    this.nextSeq = headSeq + 1;
  }

  async flush(): Promise<void> {
    if (this.flushing) return;
    this.flushing = true;
    try {
      while (this.buffer.length > 0) {
        const item = this.buffer[0];
        let ack: EventAck;
        try {
          ack = await this.api.postEvent(this.sessionId, item.record);
        } catch (error) {
          if (error instanceof SequenceConflict) {
            this.reset(error.headSeq);
            this.onConflict(error.headSeq);
            return;
          }
          this.buffer.shift();
          item.reject(error);
          continue;
        }
        this.buffer.shift();
        item.resolve(ack);
      }
    } finally {
      this.flushing = false;
    }
  }
}
