/**
 * Verbatim number rendering.
 *
 * The UI never computes statistics: every displayed number must be a
 * value that arrived in a service payload. `show` is the only place a
 * number becomes text, and it performs no arithmetic; the audit helpers
 * let tests verify that each rendered number is payload-identical.
 */

export function show(value: number | null | undefined): string {
  if (value === null || value === undefined || Number.isNaN(value)) {
    return "n/a";
  }
  return String(value);
}

/** All numbers reachable in a JSON payload (for the snapshot audit). */
export function collectNumbers(payload: unknown, out: Set<number> = new Set()): Set<number> {
  if (typeof payload === "number") {
    out.add(payload);
  } else if (Array.isArray(payload)) {
    for (const item of payload) collectNumbers(item, out);
  } else if (payload !== null && typeof payload === "object") {
    for (const value of Object.values(payload as Record<string, unknown>)) {
      collectNumbers(value, out);
    }
  }
  return out;
}

const NUMBER_RE = /-?\d+(?:\.\d+)?(?:e[+-]?\d+)?/gi;

/** Numeric tokens appearing in rendered text (for the snapshot audit). */
export function numbersInText(text: string): number[] {
  const matches = text.match(NUMBER_RE) ?? [];
  return matches.map(Number).filter((v) => Number.isFinite(v));
}

/** All strings reachable in a JSON payload (ids may embed digits). */
export function collectStrings(payload: unknown, out: Set<string> = new Set()): Set<string> {
  if (typeof payload === "string") {
    out.add(payload);
  } else if (Array.isArray(payload)) {
    for (const item of payload) collectStrings(item, out);
  } else if (payload !== null && typeof payload === "object") {
    for (const value of Object.values(payload as Record<string, unknown>)) {
      collectStrings(value, out);
    }
  }
  return out;
}
