import type { JobStatus } from "./types.js";

export interface PollOptions {
  intervalMs?: number; // first wait; grows by backoff up to maxIntervalMs
  backoff?: number;
  maxIntervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (payload: { status: JobStatus }) => void;
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

/**
 * Poll a job-status endpoint until it settles (done/failed). Transient fetch
 * errors are retried on the same backoff schedule.
 */
export async function pollJob<T extends { status: JobStatus }>(
  fetchStatus: () => Promise<T>,
  options: PollOptions = {},
): Promise<T> {
  const {
    intervalMs = 1000,
    backoff = 1.5,
    maxIntervalMs = 5000,
    timeoutMs = 300_000,
    onUpdate,
  } = options;
  const deadline = Date.now() + timeoutMs;
  let wait = intervalMs;
  for (;;) {
    let payload: T | undefined;
    try {
      payload = await fetchStatus();
    } catch {
      // transient failure: fall through to the backoff sleep
    }
    if (payload) {
      onUpdate?.(payload);
      if (payload.status === "done" || payload.status === "failed") {
        return payload;
      }
    }
    if (Date.now() >= deadline) {
      throw new Error("polling timed out");
    }
    await sleep(wait);
    wait = Math.min(wait * backoff, maxIntervalMs);
  }
}
