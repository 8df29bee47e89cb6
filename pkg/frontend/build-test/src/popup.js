import { captureActivePage } from "./capture.js";
import { PanelController, IDLE_STATE, renderViewModel } from "./panel.js";
import { DEFAULT_BACKEND_URL } from "./types.js";
function element(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing element #${id}`);
    return node;
}
function render(state) {
    const view = renderViewModel(state);
    const status = element("status");
    status.textContent = view.statusLine;
    status.className = `status ${view.statusKind}`;
    const list = element("violations");
    list.replaceChildren();
    for (const entry of view.entries) {
        const item = document.createElement("li");
        // entries arrive pre-numbered; the list renders them as plain rows
        item.textContent = entry.replace(/^\d+\.\s*/, "");
        list.appendChild(item);
    }
    element("cached").hidden = !view.cachedBadge;
    element("truncated").hidden = !view.truncatedNote;
    element("check").hidden = view.retryVisible;
    element("retry").hidden = !view.retryVisible;
}
async function backendUrl() {
    const stored = await chrome.storage.sync.get({ backendUrl: DEFAULT_BACKEND_URL });
    return String(stored.backendUrl || DEFAULT_BACKEND_URL);
}
async function runCheck() {
    const controller = new PanelController({
        fetchFn: fetch,
        backendUrl: await backendUrl(),
    });
    let capture;
    try {
        capture = await captureActivePage();
    }
    catch (error) {
        render({
            ...IDLE_STATE,
            phase: "error",
            errorMessage: error instanceof Error ? error.message : String(error),
        });
        return;
    }
    render(controller.checkingState(capture));
    const state = await controller.invoke(capture);
    if (state)
        render(state);
}
document.addEventListener("DOMContentLoaded", () => {
    render(IDLE_STATE);
    element("check").addEventListener("click", runCheck);
    element("retry").addEventListener("click", runCheck);
});
