/** Page renderers. Each returns an HTML string; main.ts owns the DOM swap
 * and the event wiring. All dynamic values pass through esc(). */

import type {
  Candidate,
  ClaimRow,
  PortfolioBlock,
  RunSnapshot,
  SnapshotRow,
  TopicDetail,
} from "./types.js";
import type { LayerGroup } from "./queue.js";
import {
  claimRows,
  evidencePreview,
  hypothesisText,
  supportScore,
  confidenceBand,
} from "./queue.js";
import { activeCandidates, constraintsPassed } from "./portfolio.js";
import { attr, esc, layerBadge, statusBadge } from "./render.js";
import type { PollStatus } from "./poll.js";

// -- shell -------------------------------------------------------------------

export function navView(
  actor: string,
  runId: string | null,
  runs: string[],
  route: string
): string {
  const links = [
    ["#/dashboard", "Dashboard"],
    ["#/queue", "Review queue"],
    ["#/portfolio", "Portfolio"],
  ]
    .map(([href, label]) => {
      const active = route === href ? " class=\"active\"" : "";
      return `<a href="${href}"${active}>${label}</a>`;
    })
    .join("");
  const options = runs
    .map((id) => {
      const selected = id === runId ? " selected" : "";
      return `<option value="${attr(id)}"${selected}>${esc(id)}</option>`;
    })
    .join("");
  return `
<header class="topbar">
  <span class="brand">review console</span>
  <nav>${links}</nav>
  <label class="run-picker">run
    <select data-action="select-run">
      <option value="">choose a run</option>${options}
    </select>
  </label>
  <span class="actor" title="actions are recorded under this name">${esc(actor)}</span>
  <button type="button" class="linkish" data-action="end-session">switch reviewer</button>
</header>`;
}

export function bannerView(status: PollStatus): string {
  if (status.state === "ok") {
    return "";
  }
  return `
<div class="banner banner-lost" role="alert">
  connection to the API lost (${status.failures} failed
  ${status.failures === 1 ? "attempt" : "attempts"})
  <button type="button" data-action="retry-connection">retry now</button>
</div>`;
}

export function noticeView(notice: { kind: "info" | "error"; text: string } | null): string {
  if (!notice) {
    return "";
  }
  return `
<div class="banner banner-${notice.kind}">
  ${esc(notice.text)}
  <button type="button" data-action="dismiss-notice">dismiss</button>
</div>`;
}

// -- session start -----------------------------------------------------------

export function loginView(): string {
  return `
<section class="login">
  <h1>review console</h1>
  <p>Decisions made here are written to the run's audit trail, so the
  console needs to know who is reviewing before anything else.</p>
  <form data-action="start-session">
    <label>reviewer name
      <input name="actor" required autocomplete="off" placeholder="e.g. maya">
    </label>
    <label>API token <span class="muted">(leave empty if the server runs open)</span>
      <input name="token" autocomplete="off">
    </label>
    <button type="submit">start reviewing</button>
  </form>
</section>`;
}

// -- dashboard ---------------------------------------------------------------

const PROGRESS_ORDER = [
  "resolved",
  "running",
  "ready",
  "awaiting_approval",
  "pending",
  "failed",
  "rejected",
] as const;

export function dashboardView(snapshot: RunSnapshot | null): string {
  if (!snapshot) {
    return `<section class="empty-state"><p>Pick a run to see its progress.</p></section>`;
  }
  const total = snapshot.topics.length;
  const counts = PROGRESS_ORDER.map((name) => {
    const count = snapshot.status_counts[name] ?? 0;
    return count > 0
      ? `<span class="count count-${name}">${esc(name.replace(/_/g, " "))}: ${count}</span>`
      : "";
  }).join("");
  const settled =
    (snapshot.status_counts.resolved ?? 0) +
    (snapshot.status_counts.failed ?? 0) +
    (snapshot.status_counts.rejected ?? 0);
  const pct = total ? Math.round((settled / total) * 100) : 0;
  return `
<section>
  <h2>run ${esc(snapshot.run_id)}</h2>
  <p class="muted">dataset fingerprint ${esc(snapshot.fingerprint)}</p>
  <div class="progress"><div class="progress-fill" style="width: ${pct}%"></div></div>
  <p>${settled} of ${total} topics settled (${pct}%)</p>
  <p class="counts">${counts}</p>
  ${topicsTable(snapshot.topics)}
</section>`;
}

function topicsTable(rows: SnapshotRow[]): string {
  if (rows.length === 0) {
    return `<p class="muted">No topics registered yet.</p>`;
  }
  const body = rows
    .map(
      (row) => `
    <tr class="row-${esc(row.status)}">
      <td class="key">${esc(row.key)}</td>
      <td>${layerBadge(row.layer)}</td>
      <td>${statusBadge(row.status)}</td>
      <td>${esc(row.summary)}${row.error ? `<div class="error">${esc(row.error)}</div>` : ""}</td>
    </tr>`
    )
    .join("");
  return `
<table class="topics">
  <thead><tr><th>topic</th><th>layer</th><th>status</th><th>summary</th></tr></thead>
  <tbody>${body}</tbody>
</table>`;
}

// -- review queue ------------------------------------------------------------

export function queueView(groups: LayerGroup[], runSelected: boolean): string {
  if (!runSelected) {
    return `<section class="empty-state"><p>Pick a run to load its review queue.</p></section>`;
  }
  if (groups.length === 0) {
    return `
<section class="empty-state" data-testid="queue-empty">
  <h2>nothing awaiting review</h2>
  <p>The pipeline is either still computing or already past its gates.</p>
</section>`;
  }
  return groups
    .map(
      (group) => `
<section class="queue-group">
  <h2>${layerBadge(group.layer)} awaiting approval</h2>
  ${group.topics.map((topic) => topicCard(topic)).join("")}
</section>`
    )
    .join("");
}

export function topicCard(topic: TopicDetail): string {
  const inner =
    topic.layer === "knowledge"
      ? knowledgeBody(topic)
      : topic.layer === "wisdom"
        ? wisdomBody(topic)
        : `<p>${esc(topic.summary)}</p>`;
  return `
<article class="card" data-topic="${attr(topic.key)}">
  <header>
    <span class="key">${esc(topic.key)}</span>
    ${statusBadge(topic.status)}
  </header>
  ${inner}
  ${reviewForms(topic)}
</article>`;
}

function knowledgeBody(topic: TopicDetail): string {
  const score = supportScore(topic);
  const band = confidenceBand(topic);
  // support_score renders verbatim, never reformatted
  const scoreLine =
    score === null
      ? `<p class="muted">support score: computed after approval</p>`
      : `<p>support score <strong>${esc(String(score))}</strong>` +
        (band ? ` <span class="badge band-${esc(band)}">${esc(band)}</span>` : "") +
        `</p>`;
  const evidence = (topic.evidence ?? []).map((row) => {
    const preview = evidencePreview(row);
    const cells = preview.cells
      .map((c) => `<tr><th>${esc(c.label)}</th><td>${esc(c.value)}</td></tr>`)
      .join("");
    return `
  <details class="evidence" open>
    <summary>${esc(preview.key)}</summary>
    <table class="kv">${cells}</table>
    <blockquote>${esc(preview.report)}</blockquote>
  </details>`;
  });
  const pendingDeps = topic.deps.length - (topic.evidence?.length ?? 0);
  return `
  <p class="hypothesis">${esc(hypothesisText(topic))}</p>
  ${scoreLine}
  ${evidence.join("")}
  ${pendingDeps > 0 ? `<p class="muted">${pendingDeps} evidence input(s) not resolved yet</p>` : ""}`;
}

function wisdomBody(topic: TopicDetail): string {
  const rows = claimRows(topic)
    .map((claim) => claimLine(claim))
    .join("");
  return `
  <p>${esc(topic.summary)}</p>
  <table class="claims">
    <thead><tr><th>claim</th><th>status</th><th>support</th><th>band</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

function claimLine(claim: ClaimRow): string {
  const support =
    typeof claim.support_score === "number" ? esc(String(claim.support_score)) : "";
  const band = claim.confidence_band
    ? `<span class="badge band-${esc(claim.confidence_band)}">${esc(claim.confidence_band)}</span>`
    : "";
  return `
    <tr>
      <td><span class="key">${esc(claim.key)}</span><div>${esc(claim.summary)}</div></td>
      <td>${statusBadge(claim.status)}</td>
      <td class="num">${support}</td>
      <td>${band}</td>
    </tr>`;
}

function reviewForms(topic: TopicDetail): string {
  const editBlock =
    topic.layer === "knowledge"
      ? `
  <details class="edit">
    <summary>edit and resubmit</summary>
    <form data-action="edit-topic" data-hash="${attr(topic.hash)}">
      <textarea name="body" rows="6" spellcheck="false"
        placeholder='replacement topic body as JSON, e.g. {"claim": {"left": {"kind": "strategy", "value": "urgency"}, "right": {"kind": "strategy", "value": "default"}, "relation": "outperforms"}}'></textarea>
      <label>comment <input name="comment" autocomplete="off"></label>
      <button type="submit">resubmit</button>
    </form>
  </details>`
      : "";
  return `
  <form class="review-actions" data-action="review-topic" data-hash="${attr(topic.hash)}">
    <label>comment <input name="comment" autocomplete="off"></label>
    <button type="submit" name="verb" value="approve" class="approve">approve</button>
    <button type="submit" name="verb" value="reject" class="reject">reject</button>
  </form>
  ${editBlock}`;
}

// -- portfolio ---------------------------------------------------------------

export function portfolioView(
  blocks: PortfolioBlock[] | null,
  runSelected: boolean,
  topicHashes: Record<string, string>
): string {
  if (!runSelected) {
    return `<section class="empty-state"><p>Pick a run to curate its portfolio.</p></section>`;
  }
  if (blocks === null) {
    return `
<section class="empty-state">
  <h2>no portfolio yet</h2>
  <p>This run has no resolved message portfolio. Approve the pending
  topics and check back.</p>
</section>`;
  }
  return blocks.map((block) => portfolioBlock(block, topicHashes[block.topic] ?? "")).join("");
}

function portfolioBlock(block: PortfolioBlock, topicHash: string): string {
  const rows = block.candidates.map((c) => candidateRow(c, topicHash)).join("");
  return `
<section class="portfolio" data-topic="${attr(block.topic)}">
  <h2>${esc(block.objective)}</h2>
  <p>
    <span class="count count-resolved">active: ${block.active_count}</span>
    <span class="count count-rejected">rejected: ${block.rejected_count}</span>
  </p>
  <p class="export-row">
    <button type="button" data-action="export-json" data-topic="${attr(block.topic)}">
      export active set (JSON)</button>
    <button type="button" data-action="export-md" data-topic="${attr(block.topic)}">
      export active set (Markdown)</button>
  </p>
  <table class="candidates">
    <thead>
      <tr><th>message</th><th>generation</th><th>chars</th>
      <th>constraints</th><th>claims</th><th>review</th></tr>
    </thead>
    <tbody>${rows}</tbody>
  </table>
</section>`;
}

function candidateRow(candidate: Candidate, topicHash: string): string {
  const badges = candidate.constraint_report
    .map(
      (check) =>
        `<span class="badge ${check.passed ? "pass" : "fail"}" title="${attr(check.detail)}">` +
        `${esc(check.name)}</span>`
    )
    .join(" ");
  const okAll = constraintsPassed(candidate) ? "" : " constraint-fail";
  const verb = candidate.rejected_by_review ? "restore" : "reject";
  return `
    <tr class="${candidate.rejected_by_review ? "rejected" : "active"}${okAll}">
      <td>
        <div class="name">${esc(candidate.name)}</div>
        <div class="text">${esc(candidate.text)}</div>
        <div class="muted">${esc(candidate.rationale)}</div>
      </td>
      <td><span class="badge gen-${esc(candidate.generation)}">${esc(candidate.generation)}</span></td>
      <td class="num">${candidate.char_count}</td>
      <td>${badges}</td>
      <td class="num">${candidate.traced_claims.length}</td>
      <td>
        <form data-action="curate" data-hash="${attr(topicHash)}"
              data-candidate="${attr(candidate.name)}" data-verb="${verb}">
          <input name="comment" placeholder="comment" autocomplete="off">
          <button type="submit" class="${verb}">${verb}</button>
        </form>
      </td>
    </tr>`;
}

export function exportCounts(block: PortfolioBlock): { active: number; total: number } {
  return { active: activeCandidates(block).length, total: block.candidates.length };
}
