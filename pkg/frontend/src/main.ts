/** Browser bootstrap: wires the config form, the pending-instance card,
 * the label buttons, and the live discovery curve to the controller. */

import { ServiceClient } from "./api.js";
import { renderCurveSvg } from "./chart.js";
import { SessionController } from "./controller.js";
import { SessionView, canLabel, featureRows } from "./state.js";
import type { Label } from "./types.js";
import { validateConfig } from "./validate.js";

const baseUrl =
  new URLSearchParams(location.search).get("api") ?? location.origin.replace(/\/$/, "");
const client = new ServiceClient(baseUrl);
const controller = new SessionController(client, render);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function esc(text: string): string {
  return text.replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]!);
}

async function populateDatasets(): Promise<void> {
  const select = el<HTMLSelectElement>("dataset");
  try {
    const { datasets } = await client.listDatasets();
    select.innerHTML = datasets
      .map(
        (d) =>
          `<option value="${esc(d.dataset_id)}">${esc(d.dataset_id)} (${d.total} rows, ${d.anomaly_count} anomalies)</option>`,
      )
      .join("");
  } catch (e) {
    el("banner").textContent = `cannot reach the service at ${baseUrl}: ${String(e)}`;
    el("banner").hidden = false;
  }
}

function formValues() {
  return {
    datasetId: el<HTMLSelectElement>("dataset").value,
    budget: el<HTMLInputElement>("budget").value,
    tau: el<HTMLInputElement>("tau").value,
    seed: el<HTMLInputElement>("seed").value,
    trees: el<HTMLInputElement>("trees").value,
    subsample: el<HTMLInputElement>("subsample").value,
  };
}

function render(view: SessionView): void {
  const banner = el("banner");
  banner.hidden = !view.banner;
  banner.textContent = view.banner ?? "";

  const notice = el("notice");
  notice.hidden = !view.notice;
  notice.textContent = view.notice ?? "";

  const session = el("session");
  const snapshot = view.snapshot;
  if (!snapshot) {
    session.hidden = true;
    return;
  }
  session.hidden = false;

  el("progress").textContent =
    `${snapshot.dataset_id} | iteration ${snapshot.iteration} of ${snapshot.budget} | ` +
    `${snapshot.anomalies_found} anomalies found | ${snapshot.status}`;

  const card = el("pending");
  if (snapshot.pending) {
    const rows = featureRows(snapshot.pending, snapshot.feature_medians)
      .map(
        (r) =>
          `<tr><td>${esc(r.name)}</td><td class="num">${r.value.toFixed(4)}</td>` +
          `<td class="num">${r.deviation.toFixed(4)}</td></tr>`,
      )
      .join("");
    card.innerHTML =
      `<p>instance <strong>#${snapshot.pending.instance_id}</strong>, ` +
      `score ${snapshot.pending.score.toFixed(4)}, ` +
      `${snapshot.pending.budget_remaining} queries left</p>` +
      `<table><thead><tr><th>feature</th><th>value</th><th>|dev from median|</th></tr></thead>` +
      `<tbody>${rows}</tbody></table>`;
  } else {
    card.innerHTML =
      `<p>session complete: ${snapshot.anomalies_found} anomalies in ` +
      `${snapshot.iteration} queries</p>`;
  }

  const enabled = canLabel(view);
  el<HTMLButtonElement>("mark-anomaly").disabled = !enabled;
  el<HTMLButtonElement>("mark-nominal").disabled = !enabled;

  el("chart").innerHTML = renderCurveSvg(snapshot.curve, snapshot.budget);
  el("history").innerHTML = snapshot.query_history
    .slice()
    .reverse()
    .slice(0, 12)
    .map((h) => `<li class="${h.label}">#${h.instance_id}: ${h.label}</li>`)
    .join("");
}

function showFormErrors(errors: Record<string, string | undefined>): void {
  const box = el("form-errors");
  const lines = Object.values(errors).filter(Boolean);
  box.hidden = lines.length === 0;
  box.textContent = lines.join("; ");
}

el<HTMLFormElement>("config").addEventListener("submit", (event) => {
  event.preventDefault();
  const checked = validateConfig(formValues());
  showFormErrors(checked.errors);
  if (checked.ok && checked.request) {
    void controller.start(checked.request);
  }
});

el<HTMLButtonElement>("mark-anomaly").addEventListener("click", () => {
  void controller.labelAndAdvance("anomaly" as Label);
});
el<HTMLButtonElement>("mark-nominal").addEventListener("click", () => {
  void controller.labelAndAdvance("nominal" as Label);
});
el<HTMLButtonElement>("refresh").addEventListener("click", () => {
  void controller.refresh();
});

document.addEventListener("keydown", (event) => {
  if (event.key === "a") void controller.labelAndAdvance("anomaly" as Label);
  if (event.key === "n") void controller.labelAndAdvance("nominal" as Label);
});

void populateDatasets();
