// Live progress panel: budget gauge, query count, incumbent utility
// sparkline, and a sortable top-k candidates table with row details.

import { Candidate, SessionApi, SessionStatus } from "./api.js";
import { sparkline } from "./charts.js";
import { formatValue, formatVector } from "./format.js";

export class ProgressView {
  private utilityHistory: number[] = [];
  private k = 5;
  private sortBy: number | "utility" = "utility";
  private observedCount = 0;

  constructor(
    private api: SessionApi,
    private sessionId: string,
    private root: HTMLElement,
  ) {}

  update(status: SessionStatus): void {
    if (status.incumbent) this.utilityHistory.push(status.incumbent.utility);
    this.observedCount = status.evaluations_used;
    this.root.innerHTML = "";

    const counters = document.createElement("div");
    counters.className = "counters";
    counters.innerHTML = `
      <span class="evals">evaluations <b>${status.evaluations_used}</b> / ${status.budget}</span>
      <span class="queries">questions answered <b>${status.queries_answered}</b></span>
      <span class="stage">stage <b>${status.stage}</b></span>
      <span class="gd">recent descent evaluations <b>${status.recent_gd_evaluations}</b></span>
    `;
    this.root.appendChild(counters);

    const gauge = document.createElement("progress");
    gauge.max = status.budget;
    gauge.value = status.evaluations_used;
    this.root.appendChild(gauge);

    if (status.incumbent) {
      const inc = document.createElement("div");
      inc.className = "incumbent";
      const label = document.createElement("span");
      label.textContent = `current best outcome ${formatVector(status.incumbent.y)} (utility ${formatValue(status.incumbent.utility)})`;
      inc.appendChild(label);
      inc.appendChild(sparkline(this.utilityHistory));
      this.root.appendChild(inc);
    }
  }

  async renderCandidates(labels: string[]): Promise<void> {
    const { candidates } = await this.api.getCandidates(this.sessionId, this.k);
    let box = this.root.querySelector<HTMLElement>(".candidates");
    if (!box) {
      box = document.createElement("div");
      box.className = "candidates";
      this.root.appendChild(box);
    }
    box.innerHTML = "";

    const controls = document.createElement("div");
    controls.className = "k-controls";
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "1";
    slider.max = String(Math.max(this.observedCount, 1));
    slider.value = String(Math.min(this.k, Math.max(this.observedCount, 1)));
    slider.className = "k-slider";
    slider.addEventListener("change", () => {
      this.k = Number(slider.value);
      void this.renderCandidates(labels);
    });
    const sliderLabel = document.createElement("span");
    sliderLabel.textContent = `top ${slider.value}`;
    controls.append(sliderLabel, slider);
    box.appendChild(controls);

    const rows = [...candidates];
    if (this.sortBy !== "utility") {
      const j = this.sortBy as number;
      rows.sort((a, b) => a.y[j] - b.y[j]);
    }

    const table = document.createElement("table");
    table.className = "candidate-table";
    const head = table.insertRow();
    const utilHead = document.createElement("th");
    utilHead.textContent = "utility";
    utilHead.addEventListener("click", () => {
      this.sortBy = "utility";
      void this.renderCandidates(labels);
    });
    head.appendChild(utilHead);
    labels.forEach((label, j) => {
      const th = document.createElement("th");
      th.textContent = `${label} ↓`;
      th.className = "sortable";
      th.addEventListener("click", () => {
        this.sortBy = j;
        void this.renderCandidates(labels);
      });
      head.appendChild(th);
    });
    head.appendChild(document.createElement("th")).textContent = "source";

    rows.forEach((c: Candidate) => {
      const row = table.insertRow();
      row.className = "candidate-row";
      row.insertCell().textContent = formatValue(c.utility);
      c.y.forEach((v) => {
        const cell = row.insertCell();
        cell.textContent = formatValue(v);
        cell.className = "value";
      });
      row.insertCell().textContent = c.provenance;
      const detail = table.insertRow();
      detail.className = "candidate-detail hidden";
      const cell = detail.insertCell();
      cell.colSpan = labels.length + 2;
      cell.textContent = `decision vector ${formatVector(c.x)}`;
      row.addEventListener("click", () => detail.classList.toggle("hidden"));
    });
    box.appendChild(table);
  }
}
