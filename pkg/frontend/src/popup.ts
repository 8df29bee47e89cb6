import { captureActivePage } from "./capture.js";
import { PanelController, IDLE_STATE, renderViewModel } from "./panel.js";
import type { PanelState } from "./types.js";
import { DEFAULT_BACKEND_URL } from "./types.js";

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(state: PanelState): void {
  const view = renderViewModel(state);
  const status = element<HTMLDivElement>("status");
  status.textContent = view.statusLine;
  status.className = `status ${view.statusKind}`;

  const list = element<HTMLOListElement>("violations");
  list.replaceChildren();
  for (const entry of view.entries) {
    const item = document.createElement("li");
    // entries arrive pre-numbered; the list renders them as plain rows
    item.textContent = entry.replace(/^\d+\.\s*/, "");
    list.appendChild(item);
  }

  element<HTMLSpanElement>("cached").hidden = !view.cachedBadge;
  element<HTMLSpanElement>("truncated").hidden = !view.truncatedNote;
  element<HTMLButtonElement>("check").hidden = view.retryVisible;
  element<HTMLButtonElement>("retry").hidden = !view.retryVisible;
}

async function backendUrl(): Promise<string> {
  const stored = await chrome.storage.sync.get({ backendUrl: DEFAULT_BACKEND_URL });
  return String(stored.backendUrl || DEFAULT_BACKEND_URL);
}

async function runCheck(): Promise<void> {
  const controller = new PanelController({
    fetchFn: fetch as never,
    backendUrl: await backendUrl(),
  });
  let capture;
  try {
    capture = await captureActivePage();
  } catch (error) {
    render({
      ...IDLE_STATE,
      phase: "error",
      errorMessage: error instanceof Error ? error.message : String(error),
    });
    return;
  }
  render(controller.checkingState(capture));
  const state = await controller.invoke(capture);
  if (state) render(state);
}

document.addEventListener("DOMContentLoaded", () => {
  render(IDLE_STATE);
  element<HTMLButtonElement>("check").addEventListener("click", runCheck);
  element<HTMLButtonElement>("retry").addEventListener("click", runCheck);
});
