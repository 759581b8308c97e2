// Renders one pairwise query: side-by-side visualizations of the two
// candidate outcomes, per-objective winner highlights, and exactly-once
// choice submission keyed by the query id.

import { PendingQuery, SessionApi, ApiError } from "./api.js";
import { groupedBars, parallelCoordinates } from "./charts.js";
import { formatValue } from "./format.js";

export interface QueryViewCallbacks {
  onAnswered: () => void;
  onConflict: () => void;
}

export class QueryView {
  private submitting = false;
  private parcoords = false;

  constructor(
    private api: SessionApi,
    private sessionId: string,
    private root: HTMLElement,
    private callbacks: QueryViewCallbacks,
  ) {}

  render(query: PendingQuery): void {
    this.root.innerHTML = "";
    this.submitting = false;

    const card = document.createElement("div");
    card.className = "query-card";
    card.dataset.queryId = query.query_id;

    const heading = document.createElement("h2");
    heading.textContent =
      query.purpose === "init" ? "Warm-up question: which outcome do you prefer?" : "Which outcome do you prefer?";
    card.appendChild(heading);

    const note = document.createElement("p");
    note.className = "orientation-note";
    note.textContent = "All objectives are minimized: lower bars are better.";
    card.appendChild(note);

    const chartBox = document.createElement("div");
    chartBox.className = "chart-box";
    const drawChart = () => {
      chartBox.innerHTML = "";
      chartBox.appendChild(
        this.parcoords
          ? parallelCoordinates(query.y1, query.y2, query.objective_labels)
          : groupedBars(query.y1, query.y2, query.objective_labels),
      );
    };
    drawChart();
    card.appendChild(chartBox);

    const toggle = document.createElement("button");
    toggle.className = "toggle-parcoords";
    toggle.textContent = "Toggle parallel coordinates";
    toggle.addEventListener("click", () => {
      this.parcoords = !this.parcoords;
      drawChart();
    });
    card.appendChild(toggle);

    const table = document.createElement("table");
    table.className = "outcome-table";
    const head = table.insertRow();
    head.insertCell().textContent = "objective";
    head.insertCell().textContent = "candidate A";
    head.insertCell().textContent = "candidate B";
    query.objective_labels.forEach((label, j) => {
      const row = table.insertRow();
      row.insertCell().textContent = `${label} (lower is better)`;
      const a = row.insertCell();
      const b = row.insertCell();
      a.textContent = formatValue(query.y1[j]);
      b.textContent = formatValue(query.y2[j]);
      a.className = "value value-a";
      b.className = "value value-b";
      if (query.y1[j] < query.y2[j]) a.classList.add("winner");
      else if (query.y2[j] < query.y1[j]) b.classList.add("winner");
    });
    card.appendChild(table);

    const buttons = document.createElement("div");
    buttons.className = "choice-buttons";
    ([0, 1] as const).forEach((choice) => {
      const btn = document.createElement("button");
      btn.className = `choose choose-${choice === 0 ? "a" : "b"}`;
      btn.dataset.choice = String(choice);
      btn.textContent = choice === 0 ? "Prefer A" : "Prefer B";
      btn.addEventListener("click", () => void this.submit(query, choice, buttons));
      buttons.appendChild(btn);
    });
    card.appendChild(buttons);

    this.root.appendChild(card);
  }

  private setDisabled(buttons: HTMLElement, disabled: boolean): void {
    buttons.querySelectorAll("button").forEach((b) => (b.disabled = disabled));
  }

  private async submit(query: PendingQuery, choice: 0 | 1, buttons: HTMLElement): Promise<void> {
    if (this.submitting) return; // client-side exactly-once guard
    this.submitting = true;
    this.setDisabled(buttons, true);
    try {
      await this.api.submitComparison(this.sessionId, query.query_id, choice);
      this.callbacks.onAnswered();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.showBanner("This question was already answered elsewhere; refreshing.");
        this.callbacks.onConflict();
        return;
      }
      // network failure: allow a retry; the query-id key keeps it exactly-once
      this.submitting = false;
      this.setDisabled(buttons, false);
      this.showBanner("Could not reach the server. Try again.");
    }
  }

  private showBanner(text: string): void {
    let banner = this.root.querySelector<HTMLElement>(".banner");
    if (!banner) {
      banner = document.createElement("div");
      banner.className = "banner";
      this.root.prepend(banner);
    }
    banner.textContent = text;
  }
}
