/** Application shell: routing, polling, event wiring. All state lives in
 * this module for the lifetime of the tab; the server stays the source of
 * truth and every mutation goes through the documented API. */

import { ApiClient, ApiError, ConnectionLost } from "./api.js";
import { Poller, type PollStatus } from "./poll.js";
import { groupByLayer } from "./queue.js";
import { exportFileName, exportJson, exportMarkdown } from "./portfolio.js";
import { unattr } from "./render.js";
import { endSession, requireSession, selectRun, session, startSession } from "./session.js";
import type { PortfolioBlock, ReviewRequest, RunSnapshot, TopicDetail } from "./types.js";
import {
  bannerView,
  dashboardView,
  loginView,
  navView,
  noticeView,
  portfolioView,
  queueView,
} from "./views.js";

interface AppState {
  route: string;
  runs: string[];
  snapshot: RunSnapshot | null;
  awaiting: TopicDetail[];
  portfolios: PortfolioBlock[] | null;
  portfolioHashes: Record<string, string>;
  pollStatus: PollStatus;
  notice: { kind: "info" | "error"; text: string } | null;
}

const state: AppState = {
  route: "#/dashboard",
  runs: [],
  snapshot: null,
  awaiting: [],
  portfolios: null,
  portfolioHashes: {},
  pollStatus: { state: "ok", failures: 0 },
  notice: null,
};

let client: ApiClient | null = null;
let poller: Poller | null = null;

// -- rendering ---------------------------------------------------------------

function render(): void {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  const active = session();
  if (!active || !client) {
    root.innerHTML = loginView();
    return;
  }
  let page: string;
  const hasRun = active.runId !== null;
  switch (state.route) {
    case "#/queue":
      page = queueView(groupByLayer(state.awaiting), hasRun);
      break;
    case "#/portfolio":
      page = portfolioView(state.portfolios, hasRun, state.portfolioHashes);
      break;
    default:
      page = dashboardView(state.snapshot);
      break;
  }
  root.innerHTML =
    navView(active.actor, active.runId, state.runs, state.route) +
    bannerView(state.pollStatus) +
    noticeView(state.notice) +
    `<main>${page}</main>`;
}

function notify(kind: "info" | "error", text: string): void {
  state.notice = { kind, text };
  render();
}

// -- data refresh ------------------------------------------------------------

async function refresh(): Promise<void> {
  if (!client) {
    return;
  }
  const runsList = await client.listRuns();
  state.runs = runsList.runs;
  const active = session();
  if (!active?.runId) {
    state.snapshot = null;
    state.awaiting = [];
    state.portfolios = null;
    return;
  }
  const runId = active.runId;
  state.snapshot = await client.snapshot(runId);
  state.awaiting = (await client.topics(runId, "awaiting_approval")).topics;
  if (state.route === "#/portfolio") {
    await loadPortfolio(runId);
  }
}

async function loadPortfolio(runId: string): Promise<void> {
  if (!client) {
    return;
  }
  try {
    const response = await client.portfolio(runId);
    state.portfolios = response.portfolios;
    state.portfolioHashes = {};
    for (const block of state.portfolios) {
      const hash = block.topic.split("/")[1];
      if (hash) {
        state.portfolioHashes[block.topic] = hash;
      }
    }
  } catch (exc) {
    if (exc instanceof ApiError && exc.code === "NotFound") {
      state.portfolios = null;
      state.portfolioHashes = {};
      return;
    }
    throw exc;
  }
}

function restartPolling(): void {
  poller?.stop();
  poller = new Poller(refresh, (status) => {
    state.pollStatus = status;
    render();
  });
  poller.start();
}

// -- actions -----------------------------------------------------------------

async function submitReview(body: ReviewRequest, topicHash: string): Promise<void> {
  if (!client) {
    return;
  }
  try {
    await client.review(topicHash, body);
    state.notice = null;
  } catch (exc) {
    if (exc instanceof ApiError && exc.code === "InvalidState") {
      // someone else got there first; the repoll below shows the new state
      notify("error", `state conflict: ${exc.message}`);
    } else if (exc instanceof ApiError) {
      notify("error", `${exc.code}: ${exc.message}`);
    } else if (exc instanceof ConnectionLost) {
      notify("error", exc.message);
    } else {
      throw exc;
    }
  }
  poller?.retryNow();
}

function download(name: string, text: string, mime: string): void {
  const blob = new Blob([text], { type: mime });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = name;
  anchor.click();
  URL.revokeObjectURL(url);
}

function handleExport(topicKey: string, format: "json" | "md"): void {
  const active = session();
  const block = state.portfolios?.find((b) => b.topic === topicKey);
  if (!block || !active?.runId) {
    return;
  }
  if (format === "json") {
    download(exportFileName(active.runId, "json"), exportJson(active.runId, block), "application/json");
  } else {
    download(exportFileName(active.runId, "md"), exportMarkdown(active.runId, block), "text/markdown");
  }
}

// -- event wiring ------------------------------------------------------------

function onSubmit(event: SubmitEvent): void {
  const form = event.target;
  if (!(form instanceof HTMLFormElement) || !form.dataset.action) {
    return;
  }
  event.preventDefault();
  const fields = new FormData(form);
  const text = (name: string) => String(fields.get(name) ?? "").trim();

  switch (form.dataset.action) {
    case "start-session": {
      try {
        startSession(text("actor"), text("token") || null);
      } catch (exc) {
        notify("error", exc instanceof Error ? exc.message : String(exc));
        return;
      }
      client = new ApiClient("", requireSession().token);
      restartPolling();
      render();
      break;
    }
    case "review-topic": {
      const verb = event.submitter instanceof HTMLButtonElement ? event.submitter.value : "";
      if (verb !== "approve" && verb !== "reject") {
        return;
      }
      const active = requireSession();
      if (!active.runId) {
        return;
      }
      void submitReview(
        {
          action: verb,
          actor: active.actor,
          run_id: active.runId,
          comment: text("comment"),
        },
        unattr(form.dataset.hash ?? "")
      );
      break;
    }
    case "edit-topic": {
      let parsed: Record<string, unknown>;
      try {
        parsed = JSON.parse(text("body")) as Record<string, unknown>;
      } catch {
        notify("error", "replacement body is not valid JSON");
        return;
      }
      const active = requireSession();
      if (!active.runId) {
        return;
      }
      void submitReview(
        {
          action: "edit",
          actor: active.actor,
          run_id: active.runId,
          comment: text("comment"),
          new_body: parsed,
        },
        unattr(form.dataset.hash ?? "")
      );
      break;
    }
    case "curate": {
      const active = requireSession();
      if (!active.runId) {
        return;
      }
      const verb = form.dataset.verb === "restore" ? "approve" : "reject";
      void submitReview(
        {
          action: verb,
          actor: active.actor,
          run_id: active.runId,
          comment: text("comment"),
          candidate: unattr(form.dataset.candidate ?? ""),
        },
        unattr(form.dataset.hash ?? "")
      );
      break;
    }
    default:
      break;
  }
}

function onClick(event: MouseEvent): void {
  const target = event.target;
  if (!(target instanceof Element)) {
    return;
  }
  const control = target.closest("[data-action]");
  if (!(control instanceof HTMLElement) || control instanceof HTMLFormElement) {
    return;
  }
  switch (control.dataset.action) {
    case "retry-connection":
      poller?.retryNow();
      break;
    case "dismiss-notice":
      state.notice = null;
      render();
      break;
    case "end-session":
      poller?.stop();
      endSession();
      client = null;
      render();
      break;
    case "export-json":
      handleExport(unattr(control.dataset.topic ?? ""), "json");
      break;
    case "export-md":
      handleExport(unattr(control.dataset.topic ?? ""), "md");
      break;
    default:
      break;
  }
}

function onChange(event: Event): void {
  const target = event.target;
  if (target instanceof HTMLSelectElement && target.dataset.action === "select-run") {
    selectRun(target.value || null);
    state.snapshot = null;
    state.awaiting = [];
    state.portfolios = null;
    state.portfolioHashes = {};
    poller?.retryNow();
    render();
  }
}

function onRoute(): void {
  state.route = location.hash || "#/dashboard";
  if (state.route === "#/portfolio" && session()?.runId) {
    const runId = session()?.runId;
    if (runId && client) {
      void loadPortfolio(runId).then(render, () => render());
    }
  }
  render();
}

export function boot(): void {
  document.addEventListener("submit", onSubmit);
  document.addEventListener("click", onClick);
  document.addEventListener("change", onChange);
  window.addEventListener("hashchange", onRoute);
  state.route = location.hash || "#/dashboard";
  render();
}

boot();
