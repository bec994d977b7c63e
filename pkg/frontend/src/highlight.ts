import type { Mention, QueueItem } from "./types.js";

export interface Segment {
  text: string;
  highlighted: boolean;
  rule?: string;
}

export interface SegmentedField {
  segments: Segment[];
  /** True when a mention's offsets fell outside the text and highlighting
   * was abandoned for this field. */
  offsetWarning: boolean;
}

/**
 * Split a text field into plain and highlighted segments from mention
 * offsets. Defensive: any out-of-bounds or overlapping offset drops all
 * highlighting for the field (plain text back) and raises the warning
 * flag instead of rendering garbage.
 */
export function segmentText(text: string, mentions: Mention[]): SegmentedField {
  const ordered = [...mentions].sort((a, b) => a.char_start - b.char_start);
  let cursor = 0;
  const segments: Segment[] = [];
  for (const m of ordered) {
    if (m.char_start < cursor || m.char_end > text.length || m.char_start >= m.char_end) {
      return { segments: [{ text, highlighted: false }], offsetWarning: true };
    }
    if (m.char_start > cursor) {
      segments.push({ text: text.slice(cursor, m.char_start), highlighted: false });
    }
    segments.push({
      text: text.slice(m.char_start, m.char_end),
      highlighted: true,
      rule: m.rule,
    });
    cursor = m.char_end;
  }
  if (cursor < text.length) {
    segments.push({ text: text.slice(cursor), highlighted: false });
  }
  if (segments.length === 0) {
    segments.push({ text, highlighted: false });
  }
  return { segments, offsetWarning: false };
}

export function segmentItemField(
  item: QueueItem,
  field: "title" | "abstract",
): SegmentedField {
  const text = field === "title" ? item.title : (item.abstract ?? "");
  const mentions = item.mentions.filter((m) => m.field === field);
  return segmentText(text, mentions);
}
