import { DEFAULT_BACKEND_URL } from "./types.js";
document.addEventListener("DOMContentLoaded", async () => {
    const input = document.getElementById("backend-url");
    const saved = document.getElementById("saved");
    const stored = await chrome.storage.sync.get({ backendUrl: DEFAULT_BACKEND_URL });
    input.value = String(stored.backendUrl || DEFAULT_BACKEND_URL);
    document.getElementById("save")?.addEventListener("click", async () => {
        const value = input.value.trim() || DEFAULT_BACKEND_URL;
        await chrome.storage.sync.set({ backendUrl: value });
        saved.hidden = false;
        setTimeout(() => (saved.hidden = true), 1500);
    });
});
