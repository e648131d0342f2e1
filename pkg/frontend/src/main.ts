/**
 * DOM wiring for the scenario explorer. All numeric content comes from
 * validated service payloads via the pure builders in views.ts.
 */

import { Chart, registerables } from "chart.js";

import { ApiClient, ServiceError, pollRun } from "./api.js";
import {
  auctionDraftSchema,
  auctionRequestBody,
  defaultDraft,
  planRequestBody,
  scenarioDraftSchema,
} from "./scenario.js";
import { auctionStatsSchema, planSchema } from "./schemas.js";
import { ComparisonSlot, addSlot } from "./state.js";
import {
  conditionalRatesConfig,
  feasibilityBadge,
  objectiveGauges,
  planRows,
  priceHistogramConfig,
  roundBarsConfig,
  summaryLines,
  winShareConfig,
} from "./views.js";

Chart.register(...registerables);

const client = new ApiClient("");
const charts: Chart[] = [];
let slots: ComparisonSlot[] = [];

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

function showError(target: HTMLElement, message: string): void {
  target.textContent = message;
  target.hidden = false;
}

function clearError(target: HTMLElement): void {
  target.textContent = "";
  target.hidden = true;
}

function readPlanDraft() {
  const parseIds = (id: string): string[] =>
    el<HTMLTextAreaElement>(id)
      .value.split(/[\s,]+/)
      .filter((s) => s.length > 0);
  const draft = {
    ...defaultDraft(el<HTMLInputElement>("focal-club").value),
    lambda: [
      Number(el<HTMLInputElement>("lambda-1").value),
      Number(el<HTMLInputElement>("lambda-2").value),
      Number(el<HTMLInputElement>("lambda-3").value),
    ] as [number, number, number],
    keep: parseIds("keep-ids"),
    must_buy: parseIds("must-buy-ids"),
    must_sell: parseIds("must-sell-ids"),
  };
  draft.solver.seed = Number(el<HTMLInputElement>("plan-seed").value);
  return scenarioDraftSchema.parse(draft);
}

function renderSlots(): void {
  const container = el<HTMLDivElement>("comparison");
  container.replaceChildren();
  for (const slot of slots) {
    const card = document.createElement("section");
    card.className = "slot";

    const heading = document.createElement("h3");
    heading.textContent = `λ = (${slot.draft.lambda.join(", ")}) — run ${slot.runId.slice(0, 8)}`;
    const badge = document.createElement("span");
    const b = feasibilityBadge(slot.plan);
    badge.textContent = b.label;
    badge.className = b.cssClass;
    heading.append(" ", badge);
    card.append(heading);

    const gauges = document.createElement("p");
    gauges.textContent = objectiveGauges(slot.plan)
      .map((g) => `${g.label}: ${g.value}`)
      .join("  ·  ");
    card.append(gauges);

    const table = document.createElement("table");
    table.innerHTML =
      "<thead><tr><th>Action</th><th>Player</th><th>Expected fee</th><th>Fee IQR</th></tr></thead>";
    const body = document.createElement("tbody");
    for (const row of planRows(slot.plan)) {
      const tr = document.createElement("tr");
      for (const cell of [row.action, row.playerId, row.fee, row.feeIqr]) {
        const td = document.createElement("td");
        td.textContent = cell;
        tr.append(td);
      }
      if (row.action === "buy") {
        tr.classList.add("buy-row");
        tr.addEventListener("click", () => {
          el<HTMLInputElement>("auction-fixture").focus();
        });
      }
      body.append(tr);
    }
    table.append(body);
    card.append(table);
    container.append(card);
  }
}

async function runPlan(): Promise<void> {
  const errBox = el<HTMLElement>("plan-error");
  clearError(errBox);
  let draft;
  try {
    draft = readPlanDraft();
  } catch (e) {
    showError(errBox, `invalid scenario: ${(e as Error).message}`);
    return;
  }
  const status = el<HTMLElement>("plan-status");
  try {
    const dataset = el<HTMLSelectElement>("dataset-select").value;
    const runId = await client.submitPlan(planRequestBody(draft, dataset));
    status.textContent = `run ${runId} submitted…`;
    const doc = await pollRun(client, runId, {
      onTick: (d) => (status.textContent = `run ${runId}: ${d.status}`),
    });
    if (doc.status === "failed") {
      showError(errBox, doc.error ?? "run failed");
      return;
    }
    const plan = planSchema.parse(doc.result);
    slots = addSlot(slots, { runId, draft, plan });
    renderSlots();
  } catch (e) {
    showError(errBox, e instanceof ServiceError ? e.message : String(e));
  }
}

function mountChart(canvasId: string, config: unknown | null): void {
  const canvas = el<HTMLCanvasElement>(canvasId);
  canvas.hidden = config === null;
  if (config === null) return;
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  charts.push(new Chart(canvas, config as any));
}

async function runAuction(): Promise<void> {
  const errBox = el<HTMLElement>("auction-error");
  clearError(errBox);
  let draft;
  try {
    draft = auctionDraftSchema.parse({
      fixture: el<HTMLInputElement>("auction-fixture").value,
      n_sim: Number(el<HTMLInputElement>("auction-nsim").value),
      rounds: Number(el<HTMLInputElement>("auction-rounds").value),
      seed: Number(el<HTMLInputElement>("auction-seed").value),
    });
  } catch (e) {
    showError(errBox, `invalid auction setup: ${(e as Error).message}`);
    return;
  }
  const status = el<HTMLElement>("auction-status");
  try {
    const runId = await client.submitAuction(auctionRequestBody(draft));
    status.textContent = `run ${runId} submitted…`;
    const doc = await pollRun(client, runId, {
      onTick: (d) => (status.textContent = `run ${runId}: ${d.status}`),
    });
    if (doc.status === "failed") {
      showError(errBox, doc.error ?? "run failed");
      return;
    }
    const stats = auctionStatsSchema.parse(doc.result);
    while (charts.length) charts.pop()!.destroy();
    el<HTMLElement>("auction-summary").textContent = summaryLines(stats).join("  ·  ");
    mountChart("chart-rounds", roundBarsConfig(stats));
    mountChart("chart-rates", conditionalRatesConfig(stats));
    mountChart("chart-prices", priceHistogramConfig(stats));
    mountChart("chart-shares", winShareConfig(stats));
  } catch (e) {
    showError(errBox, e instanceof ServiceError ? e.message : String(e));
  }
}

async function init(): Promise<void> {
  const listing = await client.listDatasets();
  const select = el<HTMLSelectElement>("dataset-select");
  for (const name of [...listing.bundled, ...listing.uploaded]) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    select.append(opt);
  }
  const fixtures = el<HTMLDataListElement>("fixture-options");
  for (const name of listing.auction_fixtures) {
    const opt = document.createElement("option");
    opt.value = name;
    fixtures.append(opt);
  }
  el<HTMLButtonElement>("run-plan").addEventListener("click", () => void runPlan());
  el<HTMLButtonElement>("run-auction").addEventListener("click", () => void runAuction());
}

void init();
