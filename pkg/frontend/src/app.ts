// Session console: create or join a session, then alternate between the
// pairwise query view (awaiting) and a compute spinner, with live progress
// throughout. One active session per tab; the server ack drives every
// transition (no optimistic UI).

import { SessionApi, SessionStatus, ApiError } from "./api.js";
import { ProgressView } from "./progress.js";
import { QueryView } from "./queryView.js";

export class App {
  private api: SessionApi;
  private sessionId: string | null = null;
  private status: SessionStatus | null = null;
  private queryView!: QueryView;
  private progress!: ProgressView;
  private stopped = false;

  constructor(
    private root: HTMLElement,
    baseUrl = "",
  ) {
    this.api = new SessionApi(baseUrl);
  }

  mount(): void {
    this.root.innerHTML = `
      <div class="layout">
        <header><h1>Interactive multi-objective optimization</h1></header>
        <section class="picker"></section>
        <section class="main"></section>
        <aside class="progress"></aside>
      </div>`;
    this.renderPicker();
  }

  stop(): void {
    this.stopped = true;
  }

  private get picker(): HTMLElement {
    return this.root.querySelector(".picker")!;
  }

  private get main(): HTMLElement {
    return this.root.querySelector(".main")!;
  }

  private renderPicker(): void {
    const box = this.picker;
    box.innerHTML = `
      <form class="session-form">
        <label>problem <input name="problem" value="dtlz2"></label>
        <label>budget <input name="budget" type="number" value="30"></label>
        <label>seed <input name="seed" type="number" value="1"></label>
        <button type="submit" class="create-session">Start session</button>
      </form>
      <form class="join-form">
        <label>session id <input name="session_id"></label>
        <button type="submit" class="join-session">Join</button>
      </form>`;
    box.querySelector(".session-form")!.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const form = ev.target as HTMLFormElement;
      void this.createSession({
        problem: (form.elements.namedItem("problem") as HTMLInputElement).value,
        budget: Number((form.elements.namedItem("budget") as HTMLInputElement).value),
        seed: Number((form.elements.namedItem("seed") as HTMLInputElement).value),
      });
    });
    box.querySelector(".join-form")!.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const form = ev.target as HTMLFormElement;
      const id = (form.elements.namedItem("session_id") as HTMLInputElement).value.trim();
      if (id) void this.joinSession(id);
    });
  }

  async createSession(spec: Record<string, unknown>): Promise<void> {
    const result = await this.api.createSession(spec);
    this.sessionId = result.session_id;
    this.status = result.status;
    this.picker.innerHTML = `<span class="session-id">session ${this.sessionId}</span>`;
    this.queryView = new QueryView(this.api, this.sessionId, this.main, {
      onAnswered: () => void this.refresh(),
      onConflict: () => void this.refresh(),
    });
    this.progress = new ProgressView(this.api, this.sessionId, this.root.querySelector(".progress")!);
    await this.refresh();
  }

  async joinSession(sessionId: string): Promise<void> {
    try {
      const status = await this.api.getStatus(sessionId);
      this.sessionId = sessionId;
      this.status = status;
      this.picker.innerHTML = `<span class="session-id">session ${this.sessionId}</span>`;
      this.queryView = new QueryView(this.api, sessionId, this.main, {
        onAnswered: () => void this.refresh(),
        onConflict: () => void this.refresh(),
      });
      this.progress = new ProgressView(this.api, sessionId, this.root.querySelector(".progress")!);
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.renderPicker();
        const note = document.createElement("p");
        note.className = "banner";
        note.textContent = "Unknown session id.";
        this.picker.prepend(note);
        return;
      }
      throw err;
    }
  }

  /** Fetch status once and render the matching view. */
  async refresh(): Promise<void> {
    if (!this.sessionId || this.stopped) return;
    this.status = await this.api.getStatus(this.sessionId);
    this.progress.update(this.status);
    if (this.status.lifecycle === "awaiting_comparison") {
      const query = await this.api.getQuery(this.sessionId);
      this.queryView.render(query);
      await this.progress.renderCandidates(this.status.objective_labels);
    } else if (this.status.lifecycle === "completed") {
      this.main.innerHTML = `<div class="completed"><h2>Optimization complete</h2>
        <p>Final candidates below.</p></div>`;
      await this.progress.renderCandidates(this.status.objective_labels);
    } else {
      this.main.innerHTML = `<div class="computing"><div class="spinner"></div>
        <p>computing (${this.status.stage})…</p></div>`;
    }
  }

  /** Long-poll loop used by the live page (tests drive refresh() directly). */
  async pollLoop(): Promise<void> {
    while (!this.stopped && this.sessionId) {
      const revision = this.status?.revision;
      this.status = await this.api.getStatus(this.sessionId, 20, revision);
      await this.refresh();
      if (this.status.lifecycle === "completed") break;
    }
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (root) {
    const app = new App(root);
    app.mount();
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
