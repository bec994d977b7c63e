import { segmentItemField } from "./highlight.js";
import type { AnnotationSession } from "./session.js";
import type { QueueItem, StatusInfo } from "./types.js";

export const GUIDELINES = [
  "Relevant: the article discusses adverse effects that persist after a SARS-CoV-2 infection, or the condition describing them.",
  "Relevant: the article studies patients with the condition, its diagnosis, prognosis, mechanisms, or management.",
  "Irrelevant: the article mentions related terms only in passing, or concerns the acute infection alone.",
  "Skip: you cannot tell from title and abstract; the document stays eligible for later rounds.",
];

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderField(item: QueueItem, field: "title" | "abstract"): HTMLElement {
  const container = el("div", `doc-${field}`);
  const { segments, offsetWarning } = segmentItemField(item, field);
  if (offsetWarning) {
    console.warn(`mention offsets out of bounds for ${item.doc_id} ${field}`);
  }
  for (const segment of segments) {
    if (segment.highlighted) {
      const mark = el("mark", "mention", segment.text);
      if (segment.rule) mark.title = segment.rule;
      container.appendChild(mark);
    } else {
      container.appendChild(document.createTextNode(segment.text));
    }
  }
  return container;
}

export function renderDocument(item: QueueItem, root: HTMLElement): void {
  root.replaceChildren();
  root.appendChild(renderField(item, "title"));
  if (item.abstract) root.appendChild(renderField(item, "abstract"));

  const meta = el(
    "div",
    "doc-meta",
    `p=${item.p.toFixed(3)}  dist=${item.dist.toFixed(3)}  iqr=${item.iqr.toFixed(3)}  ` +
      `rank ${item.rank}, round ${item.round}`,
  );
  root.appendChild(meta);

  const guide = el("details", "guidelines");
  guide.appendChild(el("summary", "", "Annotation guidelines"));
  const list = el("ul", "");
  for (const line of GUIDELINES) list.appendChild(el("li", "", line));
  guide.appendChild(list);
  root.appendChild(guide);
}

export function renderStatus(status: StatusInfo, root: HTMLElement): void {
  const parts = [
    `round ${status.round}`,
    `${status.annotated_total} annotated`,
    `${status.batch_remaining} left in batch`,
  ];
  if (status.last_eval) {
    parts.push(`eval AUC ${status.last_eval.auc.toFixed(3)}`);
  }
  root.textContent = parts.join(" | ");
}

export function renderBanner(message: string, root: HTMLElement): void {
  root.textContent = message;
  root.hidden = message === "";
}

/** r = relevant, i = irrelevant, s = skip. */
export function bindKeys(session: AnnotationSession, onChange: () => void): void {
  document.addEventListener("keydown", (event) => {
    const judgment =
      event.key === "r" ? "relevant" : event.key === "i" ? "irrelevant" : event.key === "s" ? "skip" : null;
    if (judgment === null) return;
    void session.judge(judgment).then(onChange);
  });
}
