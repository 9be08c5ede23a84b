/** Hand-written API payloads used across the test files. Shapes follow the
 * exported API description; values are small but structurally faithful. */

import type {
  Candidate,
  PortfolioBlock,
  RunSnapshot,
  TopicDetail,
} from "../src/types.js";

export function knowledgeDetail(overrides: Partial<TopicDetail> = {}): TopicDetail {
  return {
    key: "knowledge/aaaa1111",
    layer: "knowledge",
    hash: "aaaa1111",
    status: "awaiting_approval",
    deps: ["information/bbbb2222", "information/cccc3333"],
    spawned_by: null,
    error: null,
    summary: "urgency outperforms social_proof",
    evidence: [
      {
        key: "information/bbbb2222",
        result: {
          estimate: 0.123456789,
          p_value: 0.0012,
          n: 6000,
          interval: [0.11, 0.14],
        },
        report: "Pairwise test over 6000 encounters.",
      },
      {
        key: "information/cccc3333",
        result: { left_rate: 0.68, right_rate: 0.61 },
        report: "Per-side click rates.",
      },
    ],
    ...overrides,
  };
}

export function wisdomDetail(overrides: Partial<TopicDetail> = {}): TopicDetail {
  return {
    key: "wisdom/dddd4444",
    layer: "wisdom",
    hash: "dddd4444",
    status: "awaiting_approval",
    deps: ["knowledge/aaaa1111"],
    spawned_by: null,
    error: null,
    summary: "maximize confirmed visit bookings",
    claims: [
      {
        key: "knowledge/aaaa1111",
        status: "resolved",
        summary: "urgency outperforms social_proof",
        support_score: 0.8725,
        confidence_band: "strong",
      },
      {
        key: "knowledge/eeee5555",
        status: "rejected",
        summary: "gain_framing increases clicks",
      },
    ],
    ...overrides,
  };
}

export function candidate(overrides: Partial<Candidate> = {}): Candidate {
  return {
    name: "msg-01",
    text: "Dr. Lee has an opening this week. Book your visit today.",
    char_count: 56,
    strategy_tags: ["urgency"],
    generation: "exploitation",
    traced_claims: [{ layer: "knowledge", hash: "aaaa1111" }],
    rationale: "strongest supported strategy",
    predicted_rank_basis: 0.8725,
    constraint_report: [
      { name: "max_chars", passed: true, detail: "56 <= 160" },
      { name: "forbidden_tokens", passed: true, detail: "none present" },
      { name: "traceability", passed: true, detail: "1 claim traced" },
    ],
    rejected_by_review: false,
    ...overrides,
  };
}

export function portfolioBlock(rejected = 3, total = 20): PortfolioBlock {
  const candidates: Candidate[] = [];
  for (let i = 0; i < total; i += 1) {
    candidates.push(
      candidate({
        name: `msg-${String(i + 1).padStart(2, "0")}`,
        generation: i < 15 ? "exploitation" : "exploration",
        rejected_by_review: i < rejected,
      })
    );
  }
  return {
    topic: "wisdom/dddd4444",
    objective: "maximize confirmed visit bookings",
    candidates,
    active_count: total - rejected,
    rejected_count: rejected,
  };
}

export function snapshot(): RunSnapshot {
  return {
    run_id: "run-0123456789ab",
    fingerprint: "f00dfeed",
    status_counts: { resolved: 4, awaiting_approval: 2, pending: 1 },
    topics: [
      {
        key: "data/1111",
        layer: "data",
        status: "resolved",
        deps: [],
        spawned_by: null,
        error: null,
        summary: "encounter table ingest",
      },
      {
        key: "knowledge/aaaa1111",
        layer: "knowledge",
        status: "awaiting_approval",
        deps: ["information/bbbb2222"],
        spawned_by: null,
        error: null,
        summary: "urgency outperforms social_proof",
      },
    ],
  };
}
