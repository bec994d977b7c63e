import { describe, expect, it } from "vitest";

import { segmentText } from "../src/highlight.js";
import type { Mention } from "../src/types.js";

function mention(start: number, end: number, text: string): Mention {
  return {
    field: "title",
    char_start: start,
    char_end: end,
    surface: text.slice(start, end),
    normalized: text.slice(start, end).toLowerCase(),
    rule: "named_term",
  };
}

describe("segmentText", () => {
  const text = "a study of long COVID outcomes";

  it("one mention gives exactly one highlighted span at the offsets", () => {
    const { segments, offsetWarning } = segmentText(text, [mention(11, 21, text)]);
    expect(offsetWarning).toBe(false);
    expect(segments.filter((s) => s.highlighted)).toHaveLength(1);
    expect(segments.find((s) => s.highlighted)?.text).toBe("long COVID");
    expect(segments.map((s) => s.text).join("")).toBe(text);
  });

  it("no mentions gives plain text", () => {
    const { segments, offsetWarning } = segmentText(text, []);
    expect(offsetWarning).toBe(false);
    expect(segments).toEqual([{ text, highlighted: false }]);
  });

  it("offsets beyond the text fall back to plain text with a warning", () => {
    const { segments, offsetWarning } = segmentText(text, [mention(11, 999, text)]);
    expect(offsetWarning).toBe(true);
    expect(segments).toEqual([{ text, highlighted: false }]);
  });

  it("mentions out of order are handled; adjacent mentions keep full text", () => {
    const mentions = [mention(11, 21, text), mention(0, 1, text)];
    const { segments, offsetWarning } = segmentText(text, mentions);
    expect(offsetWarning).toBe(false);
    expect(segments.filter((s) => s.highlighted)).toHaveLength(2);
    expect(segments.map((s) => s.text).join("")).toBe(text);
  });
});
