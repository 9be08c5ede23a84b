/** Review-queue shaping: group awaiting topics by layer and pull the
 * preview fields each layer's card needs out of the topic detail. */

import type {
  ClaimRow,
  EvidenceRow,
  Layer,
  TopicDetail,
} from "./types.js";

export const LAYER_ORDER: readonly Layer[] = ["data", "information", "knowledge", "wisdom"];

export interface LayerGroup {
  layer: Layer;
  topics: TopicDetail[];
}

/** Stable grouping: layers in pipeline order, topics in key order within
 * each layer, empty layers omitted. */
export function groupByLayer(topics: TopicDetail[]): LayerGroup[] {
  const buckets = new Map<Layer, TopicDetail[]>();
  for (const topic of topics) {
    const bucket = buckets.get(topic.layer);
    if (bucket) {
      bucket.push(topic);
    } else {
      buckets.set(topic.layer, [topic]);
    }
  }
  const groups: LayerGroup[] = [];
  for (const layer of LAYER_ORDER) {
    const bucket = buckets.get(layer);
    if (bucket) {
      bucket.sort((a, b) => (a.key < b.key ? -1 : a.key > b.key ? 1 : 0));
      groups.push({ layer, topics: bucket });
    }
  }
  return groups;
}

/** Hypothesis sentence for a knowledge card, taken from the artifact when
 * resolved and the summary line otherwise. */
export function hypothesisText(topic: TopicDetail): string {
  const payload = topic.artifact?.payload;
  if (payload && typeof payload["hypothesis"] === "string") {
    return payload["hypothesis"];
  }
  return topic.summary;
}

export function supportScore(topic: TopicDetail): number | null {
  const value = topic.artifact?.payload?.["support_score"];
  return typeof value === "number" ? value : null;
}

export function confidenceBand(topic: TopicDetail): string | null {
  const value = topic.artifact?.payload?.["confidence_band"];
  return typeof value === "string" ? value : null;
}

export interface EvidenceCell {
  label: string;
  value: string;
}

export interface EvidencePreview {
  key: string;
  cells: EvidenceCell[];
  report: string;
}

/** Flatten an evidence result into label/value cells for a compact table.
 * Nested objects render as JSON; floats keep 4 significant digits so the
 * table stays scannable. */
export function evidencePreview(row: EvidenceRow): EvidencePreview {
  const cells: EvidenceCell[] = [];
  for (const [label, value] of Object.entries(row.result)) {
    cells.push({ label, value: formatCell(value) });
  }
  return { key: row.key, cells, report: row.report };
}

function formatCell(value: unknown): string {
  if (value === null || value === undefined) {
    return "n/a";
  }
  if (typeof value === "number") {
    return formatNumber(value);
  }
  if (typeof value === "string" || typeof value === "boolean") {
    return String(value);
  }
  if (Array.isArray(value) && value.every((v) => typeof v === "number")) {
    return value.map((v) => formatNumber(v)).join(", ");
  }
  return JSON.stringify(value);
}

export function formatNumber(value: number): string {
  if (Number.isInteger(value)) {
    return String(value);
  }
  if (Math.abs(value) >= 0.001 || value === 0) {
    return value.toFixed(4).replace(/0+$/, "").replace(/\.$/, ".0");
  }
  return value.toExponential(2);
}

/** Claims list for a wisdom card, verbatim from the API. */
export function claimRows(topic: TopicDetail): ClaimRow[] {
  return topic.claims ?? [];
}
