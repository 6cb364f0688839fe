// End-to-end: drive the console's client, view model, and renderer against
// a real server process wired to the canned shelf-session script.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, Client } from "../src/api.js";
import { SessionView, entityRows, planRows } from "../src/state.js";
import { Panels, renderAll } from "../src/render.js";
import type { EnvironmentData } from "../src/types.js";

const REPO_ROOT = resolve(__dirname, "..", "..");
const SCRIPTS_DIR = join(REPO_ROOT, "src", "taskplan", "data", "scripts");
const PORT = 8750 + (process.pid % 180);
const BASE = `http://127.0.0.1:${PORT}`;

const INSERT_FEEDBACK = "Insert another move_object() to move the juice upward.";

const SHELF_ENV: EnvironmentData = {
  assets: ["<table>", "<shelf_bottom>", "<shelf_top>", "<trash_bin>", "<floor>"],
  asset_states: {
    "<shelf_bottom>": "on_something(<table>)",
    "<trash_bin>": "on_something(<floor>)",
  },
  objects: ["<spam>", "<juice>"],
  object_states: {
    "<spam>": "on_something(<table>)",
    "<juice>": "on_something(<shelf_bottom>)",
  },
};

let server: ChildProcess;

function makePanels(): Panels {
  for (const id of ["environment-panel", "plan-panel", "diff-panel", "timeline-panel", "exchanges-panel", "error-panel"]) {
    const node = document.createElement("section");
    node.id = id;
    document.body.appendChild(node);
  }
  const button = document.createElement("button");
  button.id = "approve-button";
  document.body.appendChild(button);
  return {
    environment: document.getElementById("environment-panel")!,
    plan: document.getElementById("plan-panel")!,
    diff: document.getElementById("diff-panel")!,
    timeline: document.getElementById("timeline-panel")!,
    exchanges: document.getElementById("exchanges-panel")!,
    error: document.getElementById("error-panel")!,
    approveButton: button as HTMLButtonElement,
  };
}

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const response = await fetch(`${BASE}/openapi.json`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error("server did not come up");
}

beforeAll(async () => {
  const workDir = mkdtempSync(join(tmpdir(), "taskplan-console-"));
  const shelf = JSON.parse(readFileSync(join(SCRIPTS_DIR, "lfo_shelf_session.json"), "utf-8"));
  const demo = JSON.parse(readFileSync(join(SCRIPTS_DIR, "lfo_feedback_demo.json"), "utf-8"));
  // shelf instructions plus the two feedback-keyed replies
  const combined = [...shelf, ...demo.slice(1)];
  const scriptFile = join(workDir, "console_script.json");
  writeFileSync(scriptFile, JSON.stringify(combined));

  server = spawn(
    "python3",
    [
      "-m",
      "taskplan.cli",
      "serve",
      "--port",
      String(PORT),
      "--sessions-dir",
      join(workDir, "sessions"),
      "--backend",
      `script:${scriptFile}`,
    ],
    { cwd: REPO_ROOT, stdio: "ignore" },
  );
  await waitForServer();
});

afterAll(() => {
  server?.kill();
});

describe("console against a live scripted server", () => {
  const client = new Client(BASE);
  let sessionId = "";

  it("creates a session and renders the initial environment", async () => {
    const created = await client.createSession(SHELF_ENV, "lfo");
    sessionId = created.session_id;
    expect(sessionId).toBeTruthy();

    const view = new SessionView();
    view.setSummary(await client.getSession(sessionId));
    const rows = view.environmentRows();
    expect(rows.map((r) => r.name)).toContain("<juice>");
    expect(rows.find((r) => r.name === "<juice>")?.states).toEqual(["on_something(<shelf_bottom>)"]);
  });

  it("plans the first instruction with paired step explanations", async () => {
    const result = await client.sendInstruction(sessionId, "Put the juice on top of the shelf.");
    expect(result.outcome).toBe("success");
    expect(result.rounds_used).toBe(0);

    const view = new SessionView();
    view.setSummary(await client.getSession(sessionId));
    const rows = planRows(view.latestAttempt());
    expect(rows).toHaveLength(6);
    expect(rows[1]).toEqual({ index: 2, action: "grasp_object()", instruction: "grasp the juice" });
  });

  it("reflects verbatim feedback: one more move_object()", async () => {
    const result = await client.sendFeedback(sessionId, INSERT_FEEDBACK);
    expect(result.outcome).toBe("success");
    expect(result.final_plan?.task_cohesion.task_sequence).toHaveLength(7);
    const moves = result.final_plan!.task_cohesion.task_sequence.filter((a) => a === "move_object()");
    expect(moves).toHaveLength(2);

    const view = new SessionView();
    view.setSummary(await client.getSession(sessionId));
    const attempt = view.latestExchange()!.attempts;
    expect(attempt[attempt.length - 2].feedback).toMatchObject({ source: "human", text: INSERT_FEEDBACK });
  });

  it("approves the adjusted plan and chains the environment", async () => {
    const view = new SessionView();
    view.setSummary(await client.getSession(sessionId));
    const ref = view.approveRef();
    expect(ref).toEqual({ exchange: 0, attempt: 1 });
    const summary = await client.approve(sessionId, ref!);
    expect(summary.current_environment.object_states["<juice>"]).toBe("on_something(<shelf_top>)");
  });

  it("blocks approving a stale attempt with a machine-coded 409", async () => {
    try {
      await client.approve(sessionId, { exchange: 0, attempt: 0 });
      expect.unreachable("stale approve must fail");
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).status).toBe(409);
      expect((error as ApiError).code).toBe("stale_attempt");
    }
  });

  it("completes the remaining instructions with approvals", async () => {
    for (const instruction of [
      "Throw the spam into the trash bin.",
      "Move the juice from the top shelf to the table.",
      "Throw the juice into the trash bin.",
    ]) {
      const result = await client.sendInstruction(sessionId, instruction);
      expect(result.outcome).toBe("success");
      const view = new SessionView();
      view.setSummary(await client.getSession(sessionId));
      await client.approve(sessionId, view.approveRef()!);
    }
    const summary = await client.getSession(sessionId);
    expect(summary.current_environment.object_states["<spam>"]).toBe("on_something(<trash_bin>)");
    expect(summary.current_environment.object_states["<juice>"]).toBe("on_something(<trash_bin>)");
    expect(summary.exchanges).toHaveLength(4);
    expect(summary.exchanges.every((e) => e.approved_attempt !== null)).toBe(true);
  });

  it("renders the final environment panel with the chained states", async () => {
    const panels = makePanels();
    const view = new SessionView();
    view.setSummary(await client.getSession(sessionId));
    renderAll(panels, view);

    const chips = Array.from(panels.environment.querySelectorAll(".entity")).map((node) => node.textContent);
    expect(chips.some((text) => text?.includes("<spam>") && text.includes("on_something(<trash_bin>)"))).toBe(true);
    expect(chips.some((text) => text?.includes("<juice>") && text.includes("on_something(<trash_bin>)"))).toBe(true);
    expect(panels.approveButton.disabled).toBe(true); // everything approved
    document.body.replaceChildren();
  });

  it("reload reproduces identical views from the API alone", async () => {
    const first = await client.getSession(sessionId);
    const second = await client.getSession(sessionId);
    expect(second).toEqual(first);

    const render = (summary: typeof first) => {
      const panels = makePanels();
      const view = new SessionView();
      view.setSummary(summary);
      renderAll(panels, view);
      const html = document.body.innerHTML;
      document.body.replaceChildren();
      return html;
    };
    expect(render(second)).toBe(render(first));
  });

  it("exposes execution traces for approved steps", async () => {
    const trace = await client.getTrace(sessionId, 1);
    expect(trace.records.every((r) => r.ok)).toBe(true);
    expect(trace.records).toHaveLength(7); // adjusted plan has seven steps
  });

  it("environment rows derive purely from wire data", async () => {
    const summary = await client.getSession(sessionId);
    const rows = entityRows(summary.current_environment);
    expect(rows.filter((r) => r.kind === "asset")).toHaveLength(5);
    expect(rows.filter((r) => r.kind === "object")).toHaveLength(2);
  });
});
