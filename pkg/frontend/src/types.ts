/** Wire types for the annotation queue API. */

export interface Mention {
  field: "title" | "abstract";
  char_start: number;
  char_end: number;
  surface: string;
  normalized: string;
  rule: string;
}

export interface QueueItem {
  doc_id: string;
  title: string;
  abstract: string | null;
  mentions: Mention[];
  p: number;
  dist: number;
  iqr: number;
  rank: number;
  round: number;
}

export interface LabelSubmission {
  doc_id: string;
  label: 0 | 1 | "skip";
  annotator: string;
  client_timestamp: string;
}

export interface LabelResult {
  doc_id: string;
  status: "ok" | "error";
  reason?: string;
  skipped?: boolean;
}

export interface StatusInfo {
  round: number;
  annotated_total: number;
  annotated_this_round: number;
  batch_remaining: number;
  positive_rate: number | null;
  last_eval: {
    auc: number;
    sensitivity: number;
    specificity: number;
  } | null;
}

/** The three judgments an annotator can make on a displayed document. */
export type Judgment = "relevant" | "irrelevant" | "skip";
