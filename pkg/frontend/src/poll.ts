/**
 * Tiny polling helper: the server has no push channel, so views refresh on
 * an interval (capped at 5 s).  Overlapping runs are suppressed; errors go
 * to the handler instead of killing the loop.
 */

export interface Poller {
  start(): void;
  stop(): void;
  readonly running: boolean;
}

export const MAX_POLL_INTERVAL_MS = 5_000;

export function createPoller(
  tick: () => Promise<void>,
  intervalMs: number,
  onError: (error: unknown) => void = () => undefined,
  schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
  cancel: (handle: ReturnType<typeof setTimeout>) => void = clearTimeout,
): Poller {
  const interval = Math.min(intervalMs, MAX_POLL_INTERVAL_MS);
  let handle: ReturnType<typeof setTimeout> | null = null;
  let active = false;
  let inFlight = false;

  const run = async () => {
    if (inFlight) return;
    inFlight = true;
    try {
      await tick();
    } catch (error) {
      onError(error);
    } finally {
      inFlight = false;
      if (active) handle = schedule(run, interval);
    }
  };

  return {
    start() {
      if (active) return;
      active = true;
      void run();
    },
    stop() {
      active = false;
      if (handle !== null) cancel(handle);
      handle = null;
    },
    get running() {
      return active;
    },
  };
}
