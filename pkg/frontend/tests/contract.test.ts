import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

// Every call the client makes must exist in the exported API description;
// the console talks to documented endpoints only.
const CLIENT_CALLS: Array<[string, string]> = [
  ["get", "/healthz"],
  ["get", "/runs"],
  ["get", "/runs/{run_id}"],
  ["get", "/runs/{run_id}/topics"],
  ["get", "/runs/{run_id}/portfolio"],
  ["post", "/topics/{topic_hash}/review"],
  ["get", "/artifacts/{topic_hash}"],
];

interface OpenApi {
  paths: Record<string, Record<string, unknown>>;
}

describe("API description", () => {
  const here = dirname(fileURLToPath(import.meta.url));
  const spec = JSON.parse(
    readFileSync(join(here, "..", "openapi.json"), "utf-8")
  ) as OpenApi;

  it.each(CLIENT_CALLS)("documents %s %s", (method, path) => {
    expect(spec.paths[path]).toBeDefined();
    expect(spec.paths[path][method]).toBeDefined();
  });

  it("lists no client call outside the description", () => {
    const documented = new Set<string>();
    for (const [path, ops] of Object.entries(spec.paths)) {
      for (const method of Object.keys(ops)) {
        documented.add(`${method} ${path}`);
      }
    }
    for (const [method, path] of CLIENT_CALLS) {
      expect(documented.has(`${method} ${path}`)).toBe(true);
    }
  });
});
