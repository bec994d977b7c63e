import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";
import { MockServer } from "./mockServer.js";

function setup(batchSize = 20) {
  const server = new MockServer();
  server.seedBatch(batchSize);
  const api = new ApiClient(server.fetch);
  const session = new AnnotationSession(api, "tester", "session-1");
  return { server, api, session };
}

describe("annotation round trip", () => {
  it("labels three documents (r/i/s): two records, one skip, queue shrinks by two", async () => {
    const { server, session } = setup();

    const queue = await session.loadQueue(10);
    expect(queue).toHaveLength(10);
    expect(queue.map((item) => item.rank)).toEqual([1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
    const shown = queue.slice(0, 3).map((item) => item.doc_id);

    expect((await session.judge("relevant")).status).toBe("ok");
    expect((await session.judge("irrelevant")).status).toBe("ok");
    expect((await session.judge("skip")).status).toBe("ok");

    // server store gained exactly two records and one skip event
    expect(server.current.size).toBe(2);
    expect(server.current.get(shown[0]!)?.label).toBe(1);
    expect(server.current.get(shown[1]!)?.label).toBe(0);
    expect(server.skipLog).toHaveLength(1);
    expect(server.skipLog[0]?.doc_id).toBe(shown[2]);

    // refreshed queue drops the two labeled items; the skip stays eligible
    const refreshed = await session.loadQueue(10);
    const ids = refreshed.map((item) => item.doc_id);
    expect(ids).not.toContain(shown[0]);
    expect(ids).not.toContain(shown[1]);
    expect(ids).toContain(shown[2]);
  });

  it("advances the cursor only on ok", async () => {
    const { session } = setup();
    await session.loadQueue(5);
    const first = session.current()!.doc_id;

    // sabotage: unknown doc -> per-item error -> cursor holds
    session.items[0]!.doc_id = "not-a-real-doc";
    const outcome = await session.judge("relevant");
    expect(outcome.status).toBe("error");
    expect(outcome.reason).toBe("unknown doc_id");
    expect(session.current()!.doc_id).toBe("not-a-real-doc");

    session.items[0]!.doc_id = first;
    expect((await session.judge("relevant")).status).toBe("ok");
    expect(session.current()!.doc_id).not.toBe(first);
  });

  it("queue ordering matches server rank order", async () => {
    const { session } = setup();
    const queue = await session.loadQueue(10);
    const ranks = queue.map((item) => item.rank);
    expect(ranks).toEqual([...ranks].sort((a, b) => a - b));
  });
});

describe("offline retry", () => {
  it("queues a judgment offline and delivers it exactly once on reconnect", async () => {
    const { server, session } = setup();
    await session.loadQueue(5);
    const target = session.current()!.doc_id;

    server.offline = true;
    const outcome = await session.judge("relevant");
    expect(outcome.status).toBe("queued");
    expect(session.pendingCount).toBe(1);
    expect(server.current.size).toBe(0);

    // retry while still offline: nothing delivered, nothing dropped
    expect(await session.retryPending()).toBe(0);
    expect(session.pendingCount).toBe(1);

    server.offline = false;
    expect(await session.retryPending()).toBe(1);
    expect(session.pendingCount).toBe(0);
    expect(server.current.get(target)?.label).toBe(1);
    expect(server.audit).toHaveLength(1);

    // a second retry is a no-op: dedup key doc_id + session
    expect(await session.retryPending()).toBe(0);
    expect(server.audit).toHaveLength(1);
  });

  it("never double-submits a document within a session", async () => {
    const { server, session } = setup();
    await session.loadQueue(5);
    const target = session.current()!.doc_id;
    await session.judge("relevant");

    session.cursor = 0; // user navigates back to the same item
    expect((await session.judge("irrelevant")).status).toBe("ok");
    expect(server.audit).toHaveLength(1);
    expect(server.current.get(target)?.label).toBe(1);
  });
});
