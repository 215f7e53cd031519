/** Session state and the job cache (pure; no DOM, no network). */
import type { MechanismChoice } from "./types.js";

export type TabName = "studies" | "meta" | "bias" | "funnel";

export interface SessionState {
  datasetId: string | null;
  datasetM: number | null;
  warnings: string[];
  activeTab: TabName;
  scatterShape: "interval" | "region";
  model: { kind: "reitsma" | "glmm"; method: "ml" | "reml"; curve: "sroc" | "hsroc" };
  mechanisms: MechanismChoice[];
  pGrid: number[];
  /** canonical spec key -> job id */
  jobCache: Record<string, string>;
  /** job ids the user cancelled; results from these must never render */
  cancelled: Set<string>;
}

export function initialState(): SessionState {
  return {
    datasetId: null,
    datasetM: null,
    warnings: [],
    activeTab: "studies",
    scatterShape: "interval",
    model: { kind: "reitsma", method: "ml", curve: "sroc" },
    mechanisms: [
      { kind: "named", name: "estimated" },
      { kind: "named", name: "lnDOR" },
      { kind: "named", name: "sensitivity" },
      { kind: "named", name: "specificity" },
    ],
    pGrid: [1, 0.8, 0.6, 0.4],
    jobCache: {},
    cancelled: new Set(),
  };
}

/** Canonical cache key: dataset + kind + sorted-options JSON. */
export function jobKey(datasetId: string, kind: string, options: object): string {
  const canon = JSON.stringify(options, Object.keys(options as Record<string, unknown>).sort());
  return `${datasetId}::${kind}::${canon}`;
}

export function mechanismOption(choice: MechanismChoice): string | { c1: number; c2: number } {
  return choice.kind === "named" ? choice.name : { c1: choice.c1, c2: choice.c2 };
}

export interface GridSpec {
  mechanisms: (string | { c1: number; c2: number })[];
  p_values: number[];
  curve: "sroc" | "hsroc";
  form: "probit" | "step";
  correction: string;
}

export function gridSpec(state: SessionState): GridSpec {
  return {
    mechanisms: state.mechanisms.map(mechanismOption),
    p_values: state.pGrid,
    curve: state.model.curve,
    form: "probit",
    correction: "zero-studies-only",
  };
}

/**
 * Cache lookup with subset reuse: a cached grid job serves a request
 * whose p-grid is a subset of the cached one (same mechanisms, curve,
 * form), so shrinking the grid never re-enqueues finished cells.
 */
export function findGridJob(state: SessionState, spec: GridSpec): string | null {
  if (!state.datasetId) return null;
  const exact = state.jobCache[jobKey(state.datasetId, "sa_grid", spec)];
  if (exact) return exact;
  for (const [key, jobId] of Object.entries(state.jobCache)) {
    const [ds, kind, canon] = key.split("::", 3);
    if (ds !== state.datasetId || kind !== "sa_grid" || !canon) continue;
    const cached = JSON.parse(canon) as GridSpec;
    if (
      JSON.stringify(cached.mechanisms) === JSON.stringify(spec.mechanisms) &&
      cached.curve === spec.curve &&
      cached.form === spec.form &&
      cached.correction === spec.correction &&
      spec.p_values.every((p) => cached.p_values.includes(p))
    ) {
      return jobId;
    }
  }
  return null;
}

export function rememberJob(
  state: SessionState,
  kind: string,
  options: object,
  jobId: string,
): SessionState {
  if (!state.datasetId) return state;
  return {
    ...state,
    jobCache: { ...state.jobCache, [jobKey(state.datasetId, kind, options)]: jobId },
  };
}

export function markCancelled(state: SessionState, jobId: string): SessionState {
  const cancelled = new Set(state.cancelled);
  cancelled.add(jobId);
  const jobCache = Object.fromEntries(
    Object.entries(state.jobCache).filter(([, v]) => v !== jobId),
  );
  return { ...state, cancelled, jobCache };
}

/** A result may render only if its job was never cancelled. */
export function mayRender(state: SessionState, jobId: string): boolean {
  return !state.cancelled.has(jobId);
}

export function setDataset(
  state: SessionState,
  id: string,
  m: number,
  warnings: string[],
): SessionState {
  // a new dataset invalidates every cached job
  return {
    ...state,
    datasetId: id,
    datasetM: m,
    warnings,
    jobCache: {},
    cancelled: new Set(),
  };
}

export function parsePGrid(text: string): number[] | string {
  const values = text
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map(Number);
  if (values.length === 0 || values.some((v) => Number.isNaN(v))) {
    return "p grid must be a comma-separated list of numbers";
  }
  if (values[0] !== 1) return "p grid must start at 1";
  for (let i = 1; i < values.length; i++) {
    const prev = values[i - 1]!;
    const cur = values[i]!;
    if (cur >= prev) return "p grid must be strictly descending";
    if (cur <= 0) return "every p must lie in (0, 1]";
  }
  return values;
}
