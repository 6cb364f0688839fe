// DOM rendering. Every panel is rebuilt from the view model on each update;
// there is no client-side state beyond what the API returned last.

import { SessionView, diffRows, planRows, timeline } from "./state.js";

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderEnvironment(root: HTMLElement, view: SessionView): void {
  root.replaceChildren();
  root.appendChild(el("h2", "panel-title", "Environment"));
  for (const row of view.environmentRows()) {
    const line = el("div", `entity entity-${row.kind}`);
    line.appendChild(el("span", "entity-name", row.name));
    line.appendChild(el("span", "entity-kind", row.kind));
    for (const state of row.states) {
      line.appendChild(el("span", "state-chip", state));
    }
    root.appendChild(line);
  }
}

export function renderPlan(root: HTMLElement, view: SessionView): void {
  root.replaceChildren();
  root.appendChild(el("h2", "panel-title", "Plan"));
  const attempt = view.latestAttempt();
  const rows = planRows(attempt);
  if (!rows.length) {
    root.appendChild(el("p", "empty", attempt?.plan?.question || "No plan yet."));
    return;
  }
  const list = el("ol", "plan-steps");
  for (const row of rows) {
    const item = el("li", "plan-step");
    item.appendChild(el("code", "plan-action", row.action));
    item.appendChild(el("span", "plan-instruction", row.instruction));
    list.appendChild(item);
  }
  root.appendChild(list);
}

export function renderDiff(root: HTMLElement, view: SessionView): void {
  root.replaceChildren();
  root.appendChild(el("h2", "panel-title", "Before / after"));
  const rows = diffRows(view.latestAttempt()?.env_diff ?? null);
  if (!rows.length) {
    root.appendChild(el("p", "empty", "No changes claimed."));
    return;
  }
  for (const row of rows) {
    const line = el("div", "diff-row");
    line.appendChild(el("span", "diff-entity", row.entity));
    line.appendChild(el("span", "diff-change", row.change));
    root.appendChild(line);
  }
}

export function renderTimeline(root: HTMLElement, view: SessionView): void {
  root.replaceChildren();
  root.appendChild(el("h2", "panel-title", "Rounds"));
  for (const entry of timeline(view.latestExchange())) {
    root.appendChild(el("div", `timeline-entry timeline-${entry.kind}`, entry.text));
  }
  if (view.status?.running) {
    const { round, last_feedback } = view.status;
    root.appendChild(el("div", "timeline-entry timeline-progress", `round ${round} running: ${last_feedback ?? "querying"}`));
  }
}

export function renderError(root: HTMLElement, view: SessionView): void {
  root.replaceChildren();
  if (!view.error) return;
  const box = el("div", "error-banner");
  box.appendChild(el("strong", "error-code", view.error.code));
  box.appendChild(el("span", "error-message", ` ${view.error.message}`));
  const diff = view.error.detail["diff"];
  if (Array.isArray(diff)) {
    const list = el("ul", "error-diff");
    for (const line of diff) list.appendChild(el("li", "error-diff-line", String(line)));
    box.appendChild(list);
  }
  root.appendChild(box);
}

export function renderExchanges(root: HTMLElement, view: SessionView): void {
  root.replaceChildren();
  root.appendChild(el("h2", "panel-title", "Exchanges"));
  for (const exchange of view.summary?.exchanges ?? []) {
    const line = el(
      "div",
      `exchange exchange-${exchange.outcome}`,
      `${exchange.index + 1}. ${exchange.instruction} [${exchange.outcome}` +
        (exchange.approved_attempt !== null ? ", approved]" : "]"),
    );
    root.appendChild(line);
  }
}

export interface Panels {
  environment: HTMLElement;
  plan: HTMLElement;
  diff: HTMLElement;
  timeline: HTMLElement;
  exchanges: HTMLElement;
  error: HTMLElement;
  approveButton: HTMLButtonElement;
}

export function renderAll(panels: Panels, view: SessionView): void {
  renderEnvironment(panels.environment, view);
  renderPlan(panels.plan, view);
  renderDiff(panels.diff, view);
  renderTimeline(panels.timeline, view);
  renderExchanges(panels.exchanges, view);
  renderError(panels.error, view);
  panels.approveButton.disabled = view.busy || view.approveRef() === null;
}
