/** String-template rendering primitives. Views build HTML as strings and
 * main.ts swaps them into the page; every interpolated value goes through
 * esc() unless the call site explicitly marks it as trusted markup. */

const REPLACEMENTS: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function esc(value: unknown): string {
  return String(value).replace(/[&<>"']/g, (ch) => REPLACEMENTS[ch]);
}

/** Attribute-safe id fragment: keys contain "/" which breaks querySelector
 * lookups, so data attributes carry encoded values instead. */
export function attr(value: string): string {
  return esc(encodeURIComponent(value));
}

export function unattr(value: string): string {
  return decodeURIComponent(value);
}

export function statusBadge(status: string): string {
  return `<span class="badge status-${esc(status)}">${esc(status.replace(/_/g, " "))}</span>`;
}

export function layerBadge(layer: string): string {
  return `<span class="badge layer-${esc(layer)}">${esc(layer)}</span>`;
}
