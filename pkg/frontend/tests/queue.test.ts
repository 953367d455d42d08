/** Event queue: ordering, buffering, and conflict resync. */

import { describe, expect, it, vi } from "vitest";

import { ApiClient, SequenceConflict } from "../src/api";
import { EventQueue } from "../src/events";
import type { EventRecord } from "../src/types";

function apiOver(handler: (record: EventRecord) => Promise<Response>): ApiClient {
  return new ApiClient("", async (input, init) => {
    if (input.endsWith("/events") && init?.method === "POST") {
      return handler(JSON.parse(String(init.body)) as EventRecord);
    }
    throw new Error(`unexpected request ${input}`);
  });
}

const ok = (seq: number) =>
  new Response(JSON.stringify({ seq }), {
    status: 200,
    headers: { "content-type": "application/json" },
  });

const conflict = (headSeq: number) =>
  new Response(JSON.stringify({ error: "SequenceConflict", head_seq: headSeq }), {
    status: 409,
    headers: { "content-type": "application/json" },
  });

describe("EventQueue", () => {
  it("assigns consecutive sequence numbers from the snapshot head", async () => {
    const seen: number[] = [];
    const api = apiOver(async (record) => {
      seen.push(record.seq);
      return ok(record.seq);
    });
    const queue = new EventQueue(api, "s", 4, () => undefined);
    await queue.submit("PlaybackPaused", "n", 0, {});
    await queue.submit("PlaybackResumed", "n", 0, {});
    expect(seen).toEqual([5, 6]);
    expect(queue.headSeq).toBe(6);
  });

  it("flushes buffered events strictly in order while offline", async () => {
    const seen: number[] = [];
    let online = false;
    const waiting: (() => void)[] = [];
    const api = apiOver(async (record) => {
      if (!online) {
        await new Promise<void>((resolve) => waiting.push(resolve));
      }
      seen.push(record.seq);
      return ok(record.seq);
    });
    const queue = new EventQueue(api, "s", 1, () => undefined);
    const first = queue.submit("PlaybackPaused", "n", 0, {});
    const second = queue.submit("PlaybackResumed", "n", 0, {});
    const third = queue.submit("PlaybackPaused", "n", 0, {});
    expect(queue.pending).toBe(3);
    online = true;
    while (waiting.length) waiting.shift()!();
    await Promise.all([first, second, third]);
    expect(seen).toEqual([2, 3, 4]);
    expect(queue.pending).toBe(0);
  });

  it("a 409 abandons the buffer and triggers the resync callback", async () => {
    const onConflict = vi.fn();
    const api = apiOver(async () => conflict(9));
    const queue = new EventQueue(api, "s", 1, onConflict);
    const first = queue.submit("PlaybackPaused", "n", 0, {});
    const second = queue.submit("PlaybackResumed", "n", 0, {});
    await expect(first).rejects.toBeInstanceOf(SequenceConflict);
    await expect(second).rejects.toBeInstanceOf(SequenceConflict);
    expect(onConflict).toHaveBeenCalledTimes(1);
    expect(onConflict).toHaveBeenCalledWith(9);
    expect(queue.pending).toBe(0);
  });

  it("continues past non-conflict errors without losing order", async () => {
    const seen: number[] = [];
    const api = apiOver(async (record) => {
      if (record.seq === 3) {
        return new Response(JSON.stringify({ detail: "nope" }), { status: 422 });
      }
      seen.push(record.seq);
      return ok(record.seq);
    });
    const queue = new EventQueue(api, "s", 1, () => undefined);
    await queue.submit("PlaybackPaused", "n", 0, {});
    await expect(queue.submit("PlaybackResumed", "n", 0, {})).rejects.toThrow("422");
    await queue.submit("PlaybackPaused", "n", 0, {});
    expect(seen).toEqual([2, 4]);
  });

  it("wall_time is RFC 3339 UTC with millisecond precision", async () => {
    let captured: EventRecord | undefined;
    const api = apiOver(async (record) => {
      captured = record;
      return ok(record.seq);
    });
    const fixed = new Date("2026-08-10T12:34:56.789Z");
    const queue = new EventQueue(api, "s", 0, () => undefined, () => fixed);
    await queue.submit("PlaybackPaused", "n", 1500, {});
    expect(captured?.wall_time).toBe("2026-08-10T12:34:56.789Z");
    expect(captured?.offset_ms).toBe(1500);
  });
});
