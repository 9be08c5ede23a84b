import { describe, expect, it } from "vitest";

import {
  activeCandidates,
  constraintsPassed,
  exportFileName,
  exportJson,
  exportMarkdown,
  rejectedCandidates,
} from "../src/portfolio.js";
import { candidate, portfolioBlock } from "./fixtures.js";

describe("curation counts", () => {
  it("splits a 20-candidate block with 3 rejections into 17 active", () => {
    const block = portfolioBlock(3, 20);
    expect(activeCandidates(block)).toHaveLength(17);
    expect(rejectedCandidates(block)).toHaveLength(3);
  });

  it("restoring a candidate grows the active set by one", () => {
    const block = portfolioBlock(3, 20);
    block.candidates[0].rejected_by_review = false;
    expect(activeCandidates(block)).toHaveLength(18);
  });
});

describe("exportJson", () => {
  it("contains only active messages", () => {
    const block = portfolioBlock(3, 20);
    const parsed = JSON.parse(exportJson("run-x", block));
    expect(parsed.messages).toHaveLength(17);
    expect(parsed.run_id).toBe("run-x");
    expect(parsed.objective).toBe("maximize confirmed visit bookings");
    const names = parsed.messages.map((m: { name: string }) => m.name);
    expect(names).not.toContain("msg-01");
    expect(names).toContain("msg-04");
  });

  it("carries the trace references for each message", () => {
    const block = portfolioBlock(0, 2);
    const parsed = JSON.parse(exportJson("run-x", block));
    expect(parsed.messages[0].traced_claims).toEqual([
      { layer: "knowledge", hash: "aaaa1111" },
    ]);
  });
});

describe("exportMarkdown", () => {
  it("renders one table row per active message", () => {
    const block = portfolioBlock(3, 20);
    const md = exportMarkdown("run-x", block);
    const rows = md.split("\n").filter((line) => line.startsWith("| msg-"));
    expect(rows).toHaveLength(17);
    expect(md).toContain("Active messages: 17 of 20");
  });

  it("escapes pipe characters inside message text", () => {
    const block = portfolioBlock(0, 1);
    block.candidates[0] = candidate({ name: "msg-01", text: "a | b" });
    const md = exportMarkdown("run-x", block);
    expect(md).toContain("a \\| b");
  });
});

describe("constraint helpers", () => {
  it("reports a candidate clean only when every check passed", () => {
    expect(constraintsPassed(candidate())).toBe(true);
    const failing = candidate({
      constraint_report: [{ name: "max_chars", passed: false, detail: "too long" }],
    });
    expect(constraintsPassed(failing)).toBe(false);
  });

  it("derives a stable file name per run and format", () => {
    expect(exportFileName("run-x", "json")).toBe("portfolio-run-x.json");
    expect(exportFileName("run-x", "md")).toBe("portfolio-run-x.md");
  });
});
