import { ApiClient } from "./api.js";
import { bindKeys, renderBanner, renderDocument, renderStatus } from "./dom.js";
import { AnnotationSession } from "./session.js";

const api = new ApiClient((url, init) => fetch(url, init));
const annotator = new URLSearchParams(location.search).get("annotator") ?? "anonymous";
const session = new AnnotationSession(api, annotator, crypto.randomUUID());

const docRoot = document.getElementById("document")!;
const statusRoot = document.getElementById("status")!;
const bannerRoot = document.getElementById("banner")!;

async function refresh(): Promise<void> {
  const item = session.current();
  if (item === null) {
    try {
      await session.loadQueue(10);
    } catch (err) {
      renderBanner(`queue unavailable: ${String(err)}`, bannerRoot);
      return;
    }
  }
  const next = session.current();
  if (next === null) {
    renderBanner("batch complete - waiting for the next round", bannerRoot);
    docRoot.replaceChildren();
  } else {
    renderBanner(session.pendingCount > 0 ? `${session.pendingCount} judgment(s) pending retry` : "", bannerRoot);
    renderDocument(next, docRoot);
  }
  try {
    renderStatus(await api.fetchStatus(), statusRoot);
  } catch {
    /* status is cosmetic; ignore */
  }
}

bindKeys(session, () => void refresh());
setInterval(() => {
  void session.retryPending().then(async (n) => {
    if (n > 0) await refresh();
  });
}, 5000);
void refresh();
