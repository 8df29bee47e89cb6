import assert from "node:assert/strict";
import http from "node:http";
import { test } from "node:test";

import { makeCapture } from "../src/capture.js";
import { PanelController, renderViewModel, IDLE_STATE } from "../src/panel.js";
import type { FetchLike } from "../src/panel.js";
import type { AnalyzeResponseBody } from "../src/types.js";

const CAPTURE = makeCapture("https://shop.test/privacy", "Privacy", "We collect data.");

function stubFetch(body: AnalyzeResponseBody, status = 200): { fn: FetchLike; calls: string[] } {
  const calls: string[] = [];
  const fn: FetchLike = async (url, init) => {
    calls.push(`${init.method} ${url}`);
    return { ok: status < 400, status, json: async () => body };
  };
  return { fn, calls };
}

function nonCompliantBody(n: number): AnalyzeResponseBody {
  return {
    verdict: "NON_COMPLIANT",
    violations: Array.from({ length: n }, (_, i) => ({
      attribute: `attr_${i}`,
      reason: i % 2 ? "unknown" : "false",
      description: `requirement ${i} is not met`,
    })),
    attributes: {},
    cached: false,
    engine_version: "0.1.0",
  };
}

test("no request is issued before user invocation", () => {
  const { fn, calls } = stubFetch(nonCompliantBody(1));
  new PanelController({ fetchFn: fn, backendUrl: "http://backend.test" });
  assert.deepEqual(calls, []);
  const view = renderViewModel(IDLE_STATE);
  assert.equal(view.statusKind, "idle");
  assert.deepEqual(view.entries, []);
});

test("non-compliant response renders exactly N numbered entries in order", async () => {
  const { fn, calls } = stubFetch(nonCompliantBody(3));
  const controller = new PanelController({ fetchFn: fn, backendUrl: "http://backend.test" });
  const state = await controller.invoke(CAPTURE);
  assert.ok(state);
  const view = renderViewModel(state);
  assert.equal(view.statusKind, "non-compliant");
  assert.equal(view.entries.length, 3);
  view.entries.forEach((entry, index) => {
    assert.ok(entry.startsWith(`${index + 1}. attr_${index}:`), entry);
  });
  assert.deepEqual(calls, ["POST http://backend.test/analyze"]);
});

test("compliant response renders zero entries", async () => {
  const body: AnalyzeResponseBody = {
    verdict: "COMPLIANT",
    violations: [],
    attributes: {},
    cached: false,
    engine_version: "0.1.0",
  };
  const controller = new PanelController({
    fetchFn: stubFetch(body).fn,
    backendUrl: "http://backend.test",
  });
  const state = await controller.invoke(CAPTURE);
  assert.ok(state);
  const view = renderViewModel(state);
  assert.equal(view.statusKind, "compliant");
  assert.deepEqual(view.entries, []);
});

test("cached flag shows the cached badge", async () => {
  const body = nonCompliantBody(1);
  body.cached = true;
  const controller = new PanelController({
    fetchFn: stubFetch(body).fn,
    backendUrl: "http://backend.test",
  });
  const state = await controller.invoke(CAPTURE);
  assert.ok(state);
  assert.equal(renderViewModel(state).cachedBadge, true);
});

test("network failure surfaces the error phase with retry", async () => {
  const failing: FetchLike = async () => {
    throw new Error("connection refused");
  };
  const controller = new PanelController({ fetchFn: failing, backendUrl: "http://backend.test" });
  const state = await controller.invoke(CAPTURE);
  assert.ok(state);
  assert.equal(state.phase, "error");
  const view = renderViewModel(state);
  assert.equal(view.statusKind, "error");
  assert.ok(view.retryVisible);
  assert.match(view.statusLine, /connection refused/);
});

test("http error status surfaces the error phase", async () => {
  const controller = new PanelController({
    fetchFn: stubFetch(nonCompliantBody(0), 502).fn,
    backendUrl: "http://backend.test",
  });
  const state = await controller.invoke(CAPTURE);
  assert.ok(state);
  assert.equal(state.phase, "error");
  assert.match(renderViewModel(state).statusLine, /502/);
});

test("a newer invocation supersedes the stale one", async () => {
  let release: (() => void) | undefined;
  const gate = new Promise<void>((resolve) => (release = resolve));
  const slow: FetchLike = async (url) => {
    if (!url.includes("analyze")) throw new Error("unexpected");
    await gate;
    return { ok: true, status: 200, json: async () => nonCompliantBody(1) };
  };
  const controller = new PanelController({ fetchFn: slow, backendUrl: "http://backend.test" });
  const first = controller.invoke(CAPTURE);
  const second = controller.invoke(CAPTURE);
  release!();
  const [firstState, secondState] = await Promise.all([first, second]);
  assert.equal(firstState, null); // dropped, not rendered
  assert.ok(secondState);
  assert.equal(secondState.phase, "done");
});

test("contract test against a live stub backend", async () => {
  const payload = nonCompliantBody(4);
  const requests: string[] = [];
  const server = http.createServer((req, res) => {
    let raw = "";
    req.on("data", (chunk) => (raw += chunk));
    req.on("end", () => {
      requests.push(`${req.method} ${req.url}`);
      const body = JSON.parse(raw);
      assert.equal(body.url, CAPTURE.url);
      assert.equal(body.text, CAPTURE.text);
      res.setHeader("Content-Type", "application/json");
      res.end(JSON.stringify(payload));
    });
  });
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const address = server.address();
  assert.ok(address && typeof address === "object");
  const backendUrl = `http://127.0.0.1:${address.port}`;

  try {
    const controller = new PanelController({
      fetchFn: fetch as unknown as FetchLike,
      backendUrl,
    });
    assert.deepEqual(requests, []); // nothing sent before invocation
    const state = await controller.invoke(CAPTURE);
    assert.ok(state);
    const view = renderViewModel(state);
    assert.equal(view.entries.length, 4);
    view.entries.forEach((entry, index) => {
      assert.ok(entry.startsWith(`${index + 1}. `));
      assert.ok(entry.includes(payload.violations[index]!.attribute));
    });
    assert.deepEqual(requests, ["POST /analyze"]);
  } finally {
    server.close();
  }
});
