/** In-memory session: reviewer name, optional token, selected run. Nothing
 * here touches localStorage; a reload starts a fresh session on purpose. */

export interface Session {
  actor: string;
  token: string | null;
  runId: string | null;
}

let current: Session | null = null;

export function startSession(actor: string, token: string | null): Session {
  const trimmed = actor.trim();
  if (!trimmed) {
    throw new Error("reviewer name is required");
  }
  current = { actor: trimmed, token: token?.trim() || null, runId: null };
  return current;
}

export function session(): Session | null {
  return current;
}

export function requireSession(): Session {
  if (!current) {
    throw new Error("no active session");
  }
  return current;
}

export function selectRun(runId: string | null): void {
  requireSession().runId = runId;
}

export function endSession(): void {
  current = null;
}
