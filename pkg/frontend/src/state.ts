// View model over the latest session summary. Pure derivations only; the
// plan content is never modified client-side.

import type {
  AttemptData,
  AttemptRef,
  EnvDiffData,
  EnvironmentData,
  ExchangeData,
  SessionSummary,
  StatusData,
} from "./types.js";
import { ApiError } from "./api.js";

export interface EntityRow {
  name: string;
  kind: "asset" | "object";
  states: string[];
}

export interface PlanRow {
  index: number;
  action: string;
  instruction: string;
}

export interface DiffRow {
  entity: string;
  change: string;
}

export interface TimelineEntry {
  kind: "attempt" | "error" | "feedback";
  text: string;
}

function statesOf(env: EnvironmentData, name: string): string[] {
  const raw = env.asset_states[name] ?? env.object_states[name];
  if (raw === undefined) return [];
  return typeof raw === "string" ? [raw] : raw;
}

export function entityRows(env: EnvironmentData): EntityRow[] {
  const rows: EntityRow[] = [];
  for (const name of env.assets) rows.push({ name, kind: "asset", states: statesOf(env, name) });
  for (const name of env.objects) rows.push({ name, kind: "object", states: statesOf(env, name) });
  return rows;
}

export function planRows(attempt: AttemptData | null): PlanRow[] {
  if (!attempt?.plan) return [];
  const { task_sequence, step_instructions } = attempt.plan.task_cohesion;
  return task_sequence.map((action, i) => ({
    index: i + 1,
    action,
    instruction: step_instructions[i] ?? "",
  }));
}

export function diffRows(diff: EnvDiffData | null): DiffRow[] {
  if (!diff) return [];
  const rows: DiffRow[] = [];
  for (const entry of diff.removed_entities) rows.push({ entity: entry.name, change: "disappeared" });
  for (const entry of diff.added_entities) rows.push({ entity: entry.name, change: `appeared (${entry.states.join(", ")})` });
  for (const change of diff.changed) {
    const bits = [...change.removed.map((s) => `-${s}`), ...change.added.map((s) => `+${s}`)];
    rows.push({ entity: change.name, change: bits.join(", ") });
  }
  return rows;
}

export function timeline(exchange: ExchangeData | null): TimelineEntry[] {
  if (!exchange) return [];
  const entries: TimelineEntry[] = [];
  exchange.attempts.forEach((attempt, i) => {
    entries.push({ kind: "attempt", text: `attempt ${i + 1}: ${attempt.plan ? "plan produced" : "no plan"}` });
    for (const error of attempt.errors) {
      const message = (error.message as string) ?? (error.reason as string) ?? JSON.stringify(error);
      entries.push({ kind: "error", text: message });
    }
    if (attempt.feedback) {
      entries.push({ kind: "feedback", text: `${attempt.feedback.source}: ${attempt.feedback.text}` });
    }
  });
  return entries;
}

export class SessionView {
  summary: SessionSummary | null = null;
  status: StatusData | null = null;
  error: ApiError | null = null;
  busy = false;

  setSummary(summary: SessionSummary): void {
    this.summary = summary;
    this.error = null;
  }

  setError(error: unknown): void {
    this.error = error instanceof ApiError ? error : new ApiError(0, { code: "error", message: String(error), detail: {} });
  }

  latestExchange(): ExchangeData | null {
    const exchanges = this.summary?.exchanges ?? [];
    return exchanges.length ? exchanges[exchanges.length - 1] : null;
  }

  latestAttempt(): AttemptData | null {
    const exchange = this.latestExchange();
    if (!exchange || exchange.attempts.length === 0) return null;
    return exchange.attempts[exchange.attempts.length - 1];
  }

  approveRef(): AttemptRef | null {
    const exchange = this.latestExchange();
    const attempt = this.latestAttempt();
    if (!exchange || !attempt || !attempt.plan) return null;
    if (exchange.approved_attempt !== null) return null;
    return { exchange: exchange.index, attempt: exchange.attempts.length - 1 };
  }

  environmentRows(): EntityRow[] {
    return this.summary ? entityRows(this.summary.current_environment) : [];
  }
}
