/**
 * Scenario drafts: what the analyst edits before a run. Drafts are
 * validated client-side against the same shape the service accepts, so a
 * bad field is caught before any request is sent.
 */

import { z } from "zod";

export const solverDraftSchema = z.object({
  method: z.enum(["GA", "SA", "HC", "BRUTE"]),
  population: z.number().int().positive(),
  max_iterations: z.number().int().positive(),
  stall_limit: z.number().int().positive(),
  seed: z.number().int(),
});

export const scenarioDraftSchema = z
  .object({
    focal_club: z.string().min(1),
    lambda: z.tuple([
      z.number().nonnegative(),
      z.number().nonnegative(),
      z.number().nonnegative(),
    ]),
    keep: z.array(z.string()),
    must_buy: z.array(z.string()),
    must_sell: z.array(z.string()),
    solver: solverDraftSchema,
  })
  .superRefine((draft, ctx) => {
    const seen = new Set<string>();
    for (const [field, ids] of [
      ["keep", draft.keep],
      ["must_buy", draft.must_buy],
      ["must_sell", draft.must_sell],
    ] as const) {
      for (const id of ids) {
        if (seen.has(id)) {
          ctx.addIssue({
            code: z.ZodIssueCode.custom,
            path: [field],
            message: `player ${id} appears in more than one directive list`,
          });
        }
        seen.add(id);
      }
    }
  });

export type ScenarioDraft = z.infer<typeof scenarioDraftSchema>;

export const auctionDraftSchema = z.object({
  fixture: z.string().min(1),
  n_sim: z.number().int().positive(),
  rounds: z.number().int().min(1),
  seed: z.number().int(),
});

export type AuctionDraft = z.infer<typeof auctionDraftSchema>;

export function defaultDraft(focalClub: string): ScenarioDraft {
  return {
    focal_club: focalClub,
    lambda: [0.45, 0.45, 0.1],
    keep: [],
    must_buy: [],
    must_sell: [],
    solver: {
      method: "GA",
      population: 30,
      max_iterations: 40,
      stall_limit: 15,
      seed: 0,
    },
  };
}

/** Request body for POST /api/plans. */
export function planRequestBody(draft: ScenarioDraft, dataset: string): object {
  return { dataset, config: draft };
}

/** Request body for POST /api/auctions. */
export function auctionRequestBody(draft: AuctionDraft): object {
  return {
    fixture: draft.fixture,
    n_sim: draft.n_sim,
    rounds: draft.rounds,
    seed: draft.seed,
  };
}
