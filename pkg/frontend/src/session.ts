import type { ApiClient } from "./api.js";
import type { Judgment, LabelSubmission, QueueItem } from "./types.js";

export interface JudgeOutcome {
  status: "ok" | "error" | "queued";
  reason?: string;
}

interface PendingJudgment {
  key: string;
  submission: LabelSubmission;
}

const LABEL_OF: Record<Judgment, 0 | 1 | "skip"> = {
  relevant: 1,
  irrelevant: 0,
  skip: "skip",
};

/**
 * Annotation state for one browser session: the ranked queue, a cursor,
 * and an outbox of judgments that failed to reach the server.
 *
 * Invariants: every judgment either gets an ok acknowledgement or stays
 * visibly pending in the outbox; a judgment is delivered at most once
 * per document per session (dedup key doc_id + session id).
 */
export class AnnotationSession {
  items: QueueItem[] = [];
  cursor = 0;
  private outbox: PendingJudgment[] = [];
  private delivered = new Set<string>();

  constructor(
    private readonly api: ApiClient,
    readonly annotator: string,
    readonly sessionId: string,
    private readonly now: () => string = () => new Date().toISOString(),
  ) {}

  get pendingCount(): number {
    return this.outbox.length;
  }

  current(): QueueItem | null {
    return this.items[this.cursor] ?? null;
  }

  async loadQueue(limit = 10): Promise<QueueItem[]> {
    this.items = await this.api.fetchQueue(limit);
    this.cursor = 0;
    return this.items;
  }

  /**
   * Record the user's judgment on the current item. On ok the cursor
   * advances; a per-item server error keeps the cursor in place so the
   * user sees what was rejected; a network failure queues the judgment
   * for retry and advances (the work is preserved, not blocked on).
   */
  async judge(judgment: Judgment): Promise<JudgeOutcome> {
    const item = this.current();
    if (item === null) {
      return { status: "error", reason: "no item displayed" };
    }
    const key = `${item.doc_id}:${this.sessionId}`;
    if (this.delivered.has(key)) {
      this.cursor += 1;
      return { status: "ok" };
    }
    const submission: LabelSubmission = {
      doc_id: item.doc_id,
      label: LABEL_OF[judgment],
      annotator: this.annotator,
      client_timestamp: this.now(),
    };
    let results;
    try {
      results = await this.api.postLabels([submission]);
    } catch {
      this.outbox.push({ key, submission });
      this.cursor += 1;
      return { status: "queued" };
    }
    const result = results[0];
    if (result === undefined || result.status !== "ok") {
      return { status: "error", reason: result?.reason ?? "no acknowledgement" };
    }
    this.delivered.add(key);
    this.cursor += 1;
    return { status: "ok" };
  }

  /** Redeliver queued judgments; each is delivered exactly once. */
  async retryPending(): Promise<number> {
    const toSend = this.outbox.filter((p) => !this.delivered.has(p.key));
    if (toSend.length === 0) {
      this.outbox = [];
      return 0;
    }
    let results;
    try {
      results = await this.api.postLabels(toSend.map((p) => p.submission));
    } catch {
      return 0; // still offline; outbox untouched
    }
    let delivered = 0;
    const failed: PendingJudgment[] = [];
    toSend.forEach((pending, i) => {
      if (results[i]?.status === "ok") {
        this.delivered.add(pending.key);
        delivered += 1;
      } else {
        failed.push(pending);
      }
    });
    this.outbox = failed;
    return delivered;
  }
}
