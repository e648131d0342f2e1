/**
 * Zod schemas mirroring the service payloads. Every response is validated
 * before any part of it reaches the DOM, so a contract drift fails loudly
 * instead of rendering garbage.
 */

import { z } from "zod";

export const priceStatsSchema = z.object({
  n: z.number().int().nonnegative(),
  mean: z.number(),
  median: z.number(),
  sd: z.number().nullable(),
  iqr: z.tuple([z.number(), z.number()]),
});

export const roundStatsSchema = z.object({
  round_index: z.number().int().positive(),
  sales: z.number().int().nonnegative(),
  conditional_rate: z.number().min(0).max(1),
  prices: priceStatsSchema.nullable(),
  win_share: z.record(z.string(), z.number().min(0).max(1)),
});

export const priceHistogramSchema = z.object({
  edges: z.array(z.number()),
  counts: z.array(z.number().int().nonnegative()),
  upsilon: z.number(),
});

export const auctionStatsSchema = z.object({
  n_sim: z.number().int().positive(),
  sale_probability: z.number().min(0).max(1),
  unsold: z.number().int().nonnegative(),
  overall_prices: priceStatsSchema.nullable(),
  rounds: z.array(roundStatsSchema),
  win_share: z.record(z.string(), z.number().min(0).max(1)),
  price_histogram: priceHistogramSchema.nullable(),
});

export const objectiveBreakdownSchema = z.object({
  cost: z.number(),
  risk: z.number(),
  quality: z.number(),
  violations: z.array(z.number()),
  fitness: z.number(),
  normalized: z.boolean(),
  feasible: z.boolean(),
});

export const planSchema = z.object({
  decision: z.record(z.string(), z.boolean()),
  buys: z.array(
    z.object({
      player_id: z.string(),
      expected_fee: z.number(),
      fee_iqr: z.tuple([z.number(), z.number()]),
    }),
  ),
  sells: z.array(
    z.object({ player_id: z.string(), expected_fee: z.number() }),
  ),
  breakdown: objectiveBreakdownSchema,
  feasible: z.boolean(),
  solver_trace: z.record(z.string(), z.unknown()),
});

export const runStatusSchema = z.enum(["queued", "running", "done", "failed"]);

export const runDocSchema = z
  .object({
    run_id: z.string(),
    status: runStatusSchema,
    result: z.unknown().nullable(),
    error: z.string().nullable(),
  })
  .passthrough();

export const datasetListingSchema = z.object({
  bundled: z.array(z.string()),
  uploaded: z.array(z.string()),
  auction_fixtures: z.array(z.string()),
});

export const submitResponseSchema = z.object({ run_id: z.string() });

export type PriceStats = z.infer<typeof priceStatsSchema>;
export type RoundStats = z.infer<typeof roundStatsSchema>;
export type AuctionStats = z.infer<typeof auctionStatsSchema>;
export type Plan = z.infer<typeof planSchema>;
export type RunDoc = z.infer<typeof runDocSchema>;
export type DatasetListing = z.infer<typeof datasetListingSchema>;
