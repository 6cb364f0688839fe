// Console wiring: forms on the left, live panels on the right. The server
// owns all planning state; this file only calls the API and re-renders.

import { ApiError, Client } from "./api.js";
import { SessionView } from "./state.js";
import { Panels, renderAll } from "./render.js";

const POLL_INTERVAL_MS = 1000;

function must<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function mountConsole(baseUrl: string): void {
  const client = new Client(baseUrl);
  const view = new SessionView();
  let sessionId: string | null = null;
  let poller: number | null = null;

  const panels: Panels = {
    environment: must("environment-panel"),
    plan: must("plan-panel"),
    diff: must("diff-panel"),
    timeline: must("timeline-panel"),
    exchanges: must("exchanges-panel"),
    error: must("error-panel"),
    approveButton: must<HTMLButtonElement>("approve-button"),
  };

  const redraw = () => renderAll(panels, view);

  async function refresh(): Promise<void> {
    if (!sessionId) return;
    view.setSummary(await client.getSession(sessionId));
    redraw();
  }

  function startPolling(): void {
    if (poller !== null) return;
    poller = window.setInterval(async () => {
      if (!sessionId) return;
      try {
        view.status = await client.getStatus(sessionId);
        redraw();
      } catch {
        // transient; next tick retries
      }
    }, POLL_INTERVAL_MS);
  }

  function stopPolling(): void {
    if (poller !== null) {
      window.clearInterval(poller);
      poller = null;
    }
    view.status = null;
  }

  async function guarded(work: () => Promise<void>): Promise<void> {
    view.busy = true;
    redraw();
    try {
      await work();
    } catch (error) {
      view.setError(error instanceof ApiError ? error : String(error));
    } finally {
      view.busy = false;
      redraw();
    }
  }

  must<HTMLFormElement>("create-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void guarded(async () => {
      const envText = must<HTMLTextAreaElement>("environment-input").value;
      const actionSet = must<HTMLSelectElement>("action-set-input").value;
      const created = await client.createSession(JSON.parse(envText), actionSet);
      sessionId = created.session_id;
      must("session-id").textContent = sessionId;
      await refresh();
    });
  });

  must<HTMLFormElement>("instruction-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void guarded(async () => {
      if (!sessionId) throw new Error("create a session first");
      const input = must<HTMLInputElement>("instruction-input");
      startPolling();
      try {
        await client.sendInstruction(sessionId, input.value);
      } finally {
        stopPolling();
      }
      input.value = "";
      await refresh();
    });
  });

  must<HTMLFormElement>("feedback-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void guarded(async () => {
      if (!sessionId) throw new Error("create a session first");
      const input = must<HTMLInputElement>("feedback-input");
      await client.sendFeedback(sessionId, input.value);
      input.value = "";
      await refresh();
    });
  });

  panels.approveButton.addEventListener("click", () => {
    void guarded(async () => {
      if (!sessionId) throw new Error("create a session first");
      const ref = view.approveRef();
      if (!ref) throw new Error("nothing to approve");
      view.setSummary(await client.approve(sessionId, ref));
    });
  });

  redraw();
}

declare global {
  interface Window {
    mountConsole: typeof mountConsole;
  }
}

if (typeof window !== "undefined") {
  window.mountConsole = mountConsole;
}
