/**
 * Pure view builders: service payload in, render description out. Every
 * number shown comes verbatim from a payload field — these functions
 * format and arrange, never compute.
 */

import type { ChartConfiguration } from "chart.js";

import { AuctionStats, Plan } from "./schemas.js";

const fmt = (x: number) => x.toFixed(2);
const pct = (x: number) => `${(x * 100).toFixed(1)}%`;

export interface PlanRow {
  action: "buy" | "sell";
  playerId: string;
  fee: string;
  feeIqr: string;
}

export function planRows(plan: Plan): PlanRow[] {
  const rows: PlanRow[] = plan.buys.map((b) => ({
    action: "buy" as const,
    playerId: b.player_id,
    fee: fmt(b.expected_fee),
    feeIqr: `[${fmt(b.fee_iqr[0])}, ${fmt(b.fee_iqr[1])}]`,
  }));
  for (const s of plan.sells) {
    rows.push({ action: "sell", playerId: s.player_id, fee: fmt(s.expected_fee), feeIqr: "—" });
  }
  return rows;
}

export function feasibilityBadge(plan: Plan): { label: string; cssClass: string } {
  return plan.feasible
    ? { label: "feasible", cssClass: "badge badge-ok" }
    : { label: "infeasible", cssClass: "badge badge-bad" };
}

export function objectiveGauges(plan: Plan): { label: string; value: string }[] {
  const b = plan.breakdown;
  return [
    { label: "cost", value: fmt(b.cost) },
    { label: "risk", value: fmt(b.risk) },
    { label: "quality", value: fmt(b.quality) },
    { label: "fitness", value: fmt(b.fitness) },
  ];
}

/** Sales per round plus the unsold remainder; bars sum to n_sim. */
export function roundBarsConfig(stats: AuctionStats): ChartConfiguration<"bar"> {
  const labels = stats.rounds.map((r) => `Round ${r.round_index}`);
  const data = stats.rounds.map((r) => r.sales);
  labels.push("Unsold");
  data.push(stats.unsold);
  return {
    type: "bar",
    data: {
      labels,
      datasets: [{ label: `Sales by round (of ${stats.n_sim})`, data }],
    },
  };
}

/** Conditional sale rate per round, straight from the payload. */
export function conditionalRatesConfig(stats: AuctionStats): ChartConfiguration<"bar"> {
  return {
    type: "bar",
    data: {
      labels: stats.rounds.map((r) => `Round ${r.round_index}`),
      datasets: [
        {
          label: "Conditional sale rate",
          data: stats.rounds.map((r) => r.conditional_rate),
        },
      ],
    },
  };
}

/**
 * Sale-price histogram from the server-side bins; the final bin ends at
 * the buyout threshold, which the title states explicitly.
 */
export function priceHistogramConfig(stats: AuctionStats): ChartConfiguration<"bar"> | null {
  const h = stats.price_histogram;
  if (!h) return null;
  const labels = h.counts.map(
    (_, i) => `${fmt(h.edges[i]!)}–${fmt(h.edges[i + 1]!)}`,
  );
  return {
    type: "bar",
    data: { labels, datasets: [{ label: "Sale prices", data: [...h.counts] }] },
    options: {
      plugins: {
        title: {
          display: true,
          text: `Sale prices (buyout threshold υ = ${fmt(h.upsilon)})`,
        },
      },
    },
  };
}

export function winShareConfig(stats: AuctionStats): ChartConfiguration<"doughnut"> {
  const clubs = Object.keys(stats.win_share);
  return {
    type: "doughnut",
    data: {
      labels: clubs.map((c) => `${c} (${pct(stats.win_share[c]!)})`),
      datasets: [{ data: clubs.map((c) => stats.win_share[c]!) }],
    },
  };
}

export function summaryLines(stats: AuctionStats): string[] {
  const lines = [`Sale probability: ${pct(stats.sale_probability)}`];
  const p = stats.overall_prices;
  if (p) {
    lines.push(`Mean price: ${fmt(p.mean)}`);
    lines.push(`Median price: ${fmt(p.median)}`);
    if (p.sd !== null) lines.push(`Price SD: ${fmt(p.sd)}`);
    lines.push(`Price IQR: [${fmt(p.iqr[0])}, ${fmt(p.iqr[1])}]`);
  }
  return lines;
}
