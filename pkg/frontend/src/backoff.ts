// Reconnect backoff: deterministic doubling from 250 ms, capped at 5 s.
// Keeping it jitter-free makes reconnect behavior exactly testable.

export const BASE_DELAY_MS = 250;
export const MAX_DELAY_MS = 5_000;

export function reconnectDelayMs(attempt: number): number {
    if (attempt <= 0) return BASE_DELAY_MS;
    const delay = BASE_DELAY_MS * 2 ** attempt;
    return Math.min(delay, MAX_DELAY_MS);
}
