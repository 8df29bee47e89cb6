export const IDLE_STATE = {
    phase: "idle",
    violations: [],
    cached: false,
    truncated: false,
};
/**
 * Drives one panel: posts captures to the backend and produces render
 * states. A new invocation supersedes any in-flight one; the stale
 * response is dropped rather than rendered.
 */
export class PanelController {
    generation = 0;
    fetchFn;
    backendUrl;
    constructor(options) {
        this.fetchFn = options.fetchFn;
        this.backendUrl = options.backendUrl.replace(/\/+$/, "");
    }
    checkingState(capture) {
        return { ...IDLE_STATE, phase: "checking", truncated: capture.truncated };
    }
    /** POST the capture; resolves to the final state, or null if superseded. */
    async invoke(capture) {
        const myGeneration = ++this.generation;
        let state;
        try {
            const response = await this.fetchFn(`${this.backendUrl}/analyze`, {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify({
                    url: capture.url,
                    title: capture.title,
                    text: capture.text,
                }),
            });
            if (!response.ok) {
                throw new Error(`backend returned ${response.status}`);
            }
            const body = (await response.json());
            state = {
                phase: "done",
                verdict: body.verdict,
                violations: body.violations ?? [],
                cached: Boolean(body.cached),
                truncated: capture.truncated,
            };
        }
        catch (error) {
            state = {
                ...IDLE_STATE,
                phase: "error",
                truncated: capture.truncated,
                errorMessage: error instanceof Error ? error.message : String(error),
            };
        }
        if (myGeneration !== this.generation) {
            return null; // a newer invocation owns the panel now
        }
        return state;
    }
}
function numbered(violations) {
    return violations.map((violation, index) => `${index + 1}. ${violation.attribute}: ${violation.description} [${violation.reason}]`);
}
/** Pure projection from panel state to what the popup shows. */
export function renderViewModel(state) {
    switch (state.phase) {
        case "idle":
            return {
                statusLine: "Click to check this page's privacy policy.",
                statusKind: "idle",
                entries: [],
                cachedBadge: false,
                truncatedNote: false,
                retryVisible: false,
            };
        case "checking":
            return {
                statusLine: "Checking compliance...",
                statusKind: "checking",
                entries: [],
                cachedBadge: false,
                truncatedNote: state.truncated,
                retryVisible: false,
            };
        case "error":
            return {
                statusLine: `Check failed: ${state.errorMessage ?? "unknown error"}`,
                statusKind: "error",
                entries: [],
                cachedBadge: false,
                truncatedNote: state.truncated,
                retryVisible: true,
            };
        case "done":
            if (state.verdict === "COMPLIANT") {
                return {
                    statusLine: "COMPLIANT",
                    statusKind: "compliant",
                    entries: [],
                    cachedBadge: state.cached,
                    truncatedNote: state.truncated,
                    retryVisible: false,
                };
            }
            return {
                statusLine: "NON-COMPLIANT",
                statusKind: "non-compliant",
                entries: numbered(state.violations),
                cachedBadge: state.cached,
                truncatedNote: state.truncated,
                retryVisible: false,
            };
    }
}
