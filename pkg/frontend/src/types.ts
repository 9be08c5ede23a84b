/** Wire types for the pipeline API. Shapes mirror the server responses
 * exactly; the console never recomputes derived numbers, it renders what
 * the API sent. */

export type Layer = "data" | "information" | "knowledge" | "wisdom";

export type TopicStatusName =
  | "pending"
  | "awaiting_approval"
  | "ready"
  | "running"
  | "resolved"
  | "failed"
  | "rejected";

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: unknown;
}

export interface SnapshotRow {
  key: string;
  layer: Layer;
  status: TopicStatusName;
  deps: string[];
  spawned_by: string | null;
  error: string | null;
  summary: string;
}

export interface RunSnapshot {
  run_id: string;
  fingerprint: string;
  status_counts: Partial<Record<TopicStatusName, number>>;
  topics: SnapshotRow[];
}

/** One evidence row attached to a knowledge topic: the information topic
 * key plus its resolved result payload and prose report. */
export interface EvidenceRow {
  key: string;
  result: Record<string, unknown>;
  report: string;
}

/** Claim summary attached to a wisdom topic. support_score and
 * confidence_band appear once the claim resolved. */
export interface ClaimRow {
  key: string;
  status: TopicStatusName;
  summary: string;
  support_score?: number;
  confidence_band?: string;
}

export interface ConstraintCheck {
  name: string;
  passed: boolean;
  detail: string;
}

export interface TopicIdRef {
  layer: Layer;
  hash: string;
}

export interface Candidate {
  name: string;
  text: string;
  char_count: number;
  strategy_tags: string[];
  generation: "exploitation" | "exploration";
  traced_claims: TopicIdRef[];
  rationale: string;
  predicted_rank_basis: number;
  constraint_report: ConstraintCheck[];
  rejected_by_review: boolean;
}

export interface ArtifactEnvelope {
  topic: { layer: Layer; hash: string };
  payload: Record<string, unknown>;
  report: string;
  provenance: Record<string, unknown>;
}

export interface TopicDetail {
  key: string;
  layer: Layer;
  hash: string;
  status: TopicStatusName;
  deps: string[];
  spawned_by: string | null;
  error: string | null;
  summary: string;
  evidence?: EvidenceRow[];
  claims?: ClaimRow[];
  artifact?: ArtifactEnvelope;
}

export interface TopicsResponse {
  run_id: string;
  topics: TopicDetail[];
}

export interface PortfolioBlock {
  topic: string;
  objective: string;
  candidates: Candidate[];
  active_count: number;
  rejected_count: number;
}

export interface PortfolioResponse {
  run_id: string;
  portfolios: PortfolioBlock[];
}

export interface RunsListResponse {
  runs: string[];
}

export type ReviewAction = "approve" | "reject" | "edit";

export interface ReviewRequest {
  action: ReviewAction;
  actor: string;
  run_id: string;
  comment?: string;
  candidate?: string;
  new_body?: Record<string, unknown>;
}

export interface ReviewResponse {
  run_id: string;
  topic: TopicDetail;
}
