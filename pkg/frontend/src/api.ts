/**
 * Thin REST client. Runs are submitted, then polled at 1 s with
 * multiplicative back-off (capped) until they reach a terminal status.
 * Fetch and sleep are injectable for tests.
 */

import {
  DatasetListing,
  RunDoc,
  datasetListingSchema,
  runDocSchema,
  submitResponseSchema,
} from "./schemas.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function readJson(resp: Response): Promise<unknown> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ServiceError(detail, resp.status);
  }
  return resp.json();
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  async listDatasets(): Promise<DatasetListing> {
    const raw = await readJson(await this.fetchFn(`${this.baseUrl}/api/datasets`));
    return datasetListingSchema.parse(raw);
  }

  private async submit(path: string, body: object): Promise<string> {
    const raw = await readJson(
      await this.fetchFn(`${this.baseUrl}${path}`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
    return submitResponseSchema.parse(raw).run_id;
  }

  submitPlan(body: object): Promise<string> {
    return this.submit("/api/plans", body);
  }

  submitAuction(body: object): Promise<string> {
    return this.submit("/api/auctions", body);
  }

  async getRun(runId: string): Promise<RunDoc> {
    const raw = await readJson(
      await this.fetchFn(`${this.baseUrl}/api/runs/${runId}`),
    );
    return runDocSchema.parse(raw);
  }
}

export interface PollOptions {
  intervalMs?: number;
  backoff?: number;
  maxIntervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onTick?: (doc: RunDoc) => void;
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

/** Poll a run until it is done or failed; resolves with the final doc. */
export async function pollRun(
  client: Pick<ApiClient, "getRun">,
  runId: string,
  opts: PollOptions = {},
): Promise<RunDoc> {
  const backoff = opts.backoff ?? 1.5;
  const maxInterval = opts.maxIntervalMs ?? 10_000;
  const sleep = opts.sleep ?? defaultSleep;
  let interval = opts.intervalMs ?? 1_000;
  for (;;) {
    const doc = await client.getRun(runId);
    opts.onTick?.(doc);
    if (doc.status === "done" || doc.status === "failed") return doc;
    await sleep(interval);
    interval = Math.min(interval * backoff, maxInterval);
  }
}
