/** Portfolio curation helpers: active-set selection and the two export
 * formats. Counts always come from the server block, never from a client
 * tally, so the view cannot drift from the source of truth. */

import type { Candidate, PortfolioBlock } from "./types.js";

export function activeCandidates(block: PortfolioBlock): Candidate[] {
  return block.candidates.filter((c) => !c.rejected_by_review);
}

export function rejectedCandidates(block: PortfolioBlock): Candidate[] {
  return block.candidates.filter((c) => c.rejected_by_review);
}

export function constraintsPassed(candidate: Candidate): boolean {
  return candidate.constraint_report.every((check) => check.passed);
}

/** Export payload carries only the active set plus enough context to use
 * it downstream (objective, trace references). */
export function exportJson(runId: string, block: PortfolioBlock): string {
  const body = {
    run_id: runId,
    topic: block.topic,
    objective: block.objective,
    active_count: block.active_count,
    messages: activeCandidates(block).map((c) => ({
      name: c.name,
      text: c.text,
      char_count: c.char_count,
      generation: c.generation,
      strategy_tags: c.strategy_tags,
      traced_claims: c.traced_claims,
    })),
  };
  return JSON.stringify(body, null, 2) + "\n";
}

export function exportMarkdown(runId: string, block: PortfolioBlock): string {
  const lines: string[] = [];
  lines.push(`# Message portfolio (${runId})`);
  lines.push("");
  lines.push(`Objective: ${block.objective}`);
  lines.push(`Active messages: ${block.active_count} of ${block.candidates.length}`);
  lines.push("");
  lines.push("| Name | Generation | Chars | Text |");
  lines.push("| --- | --- | --- | --- |");
  for (const candidate of activeCandidates(block)) {
    lines.push(
      `| ${escapePipes(candidate.name)} | ${candidate.generation} | ` +
        `${candidate.char_count} | ${escapePipes(candidate.text)} |`
    );
  }
  lines.push("");
  return lines.join("\n");
}

function escapePipes(text: string): string {
  return text.replace(/\|/g, "\\|");
}

/** File name for a download, derived from the run so repeated exports sort
 * together. */
export function exportFileName(runId: string, format: "json" | "md"): string {
  return `portfolio-${runId}.${format}`;
}
