import type { PageCapture } from "./types.js";

// Requests above this size would mostly be boilerplate; the backend hashes
// the text, so the cap must be applied consistently before sending.
export const MAX_TEXT_CHARS = 500_000;

/** Collapse whitespace runs and trim; keeps hashing and caching stable. */
export function normalizeText(raw: string): string {
  return raw.replace(/\s+/g, " ").trim();
}

export function makeCapture(
  url: string,
  title: string,
  rawText: string,
  maxChars: number = MAX_TEXT_CHARS,
): PageCapture {
  const text = normalizeText(rawText);
  if (text.length <= maxChars) {
    return { url, title, text, truncated: false };
  }
  return { url, title, text: text.slice(0, maxChars), truncated: true };
}

/**
 * Capture the active tab's visible text. Runs only on explicit user
 * invocation; never on page load. Browser-internal pages cannot be
 * scripted and surface as a restricted-page error.
 */
export async function captureActivePage(): Promise<PageCapture> {
  const [tab] = await chrome.tabs.query({ active: true, currentWindow: true });
  if (!tab || tab.id === undefined || !tab.url) {
    throw new Error("No active tab to check.");
  }
  if (!/^https?:/i.test(tab.url)) {
    throw new Error("This page cannot be checked (restricted page).");
  }
  const [result] = await chrome.scripting.executeScript({
    target: { tabId: tab.id },
    // script/style content is excluded by reading innerText of the body
    func: () => document.body ? document.body.innerText : "",
  });
  return makeCapture(tab.url, tab.title ?? "", String(result?.result ?? ""));
}
