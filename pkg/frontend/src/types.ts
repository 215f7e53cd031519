/** Payload shapes of the analysis service. The UI renders these as-is. */

export interface DatasetCreated {
  id: string;
  m: number;
  warnings: string[];
}

export interface StudyRow {
  id: string;
  tp: number;
  fp: number;
  fn: number;
  tn: number;
}

export interface DatasetDetail {
  id: string;
  m: number;
  warnings: string[];
  table: { source_name: string; studies: StudyRow[] };
}

export type JobState = "queued" | "running" | "done" | "failed" | "cancelled";

export interface JobSnapshot<R = unknown> {
  id: string;
  kind: string;
  dataset_id: string;
  state: JobState;
  progress: string | null;
  result?: R;
  error?: string;
}

export interface MetricCI {
  est: number;
  lo: number;
  hi: number;
}

export interface StudyMetrics {
  id: string;
  se: MetricCI;
  sp: MetricCI;
  lnDOR: MetricCI;
  lr_pos: MetricCI;
  lr_neg: MetricCI;
}

export interface ForestSeries {
  metric: string;
  rows: { id: string; est: number; lo: number; hi: number }[];
  footer: { min: number; median: number; max: number };
}

export interface ScatterPoint {
  id: string;
  fpr: number;
  se: number;
  fpr_lo?: number;
  fpr_hi?: number;
  se_lo?: number;
  se_hi?: number;
  region?: [number, number][];
}

export interface TransformedRow {
  id: string;
  y1: number;
  y2: number;
  s1sq: number;
  s2sq: number;
}

export interface DescriptivesResult {
  m: number;
  original: { source_name: string; studies: StudyRow[] };
  corrected_flags: boolean[];
  transformed: TransformedRow[];
  metrics: StudyMetrics[];
  forest: Record<string, ForestSeries>;
  scatter_interval: ScatterPoint[];
  scatter_region: ScatterPoint[];
}

export interface FitPayload {
  method: string;
  mu: [number, number];
  tau: [number, number];
  rho: number;
  cov: number[][];
  loglik: number;
  converged: boolean;
  n_iter: number;
  quadrature?: { nodes_per_dim: number };
}

export interface SaucPayload {
  value: number;
  lo: number;
  hi: number;
  kind: string;
  domain: [number, number];
}

export interface FitResult {
  fit: FitPayload;
  sroc: { kind: string; points: [number, number][] };
  sauc: SaucPayload;
  sop: { se: number; sp: number; region: [number, number][] };
}

export interface Mechanism {
  mode: string;
  c1: number;
  c2: number;
  u: number;
  form: string;
}

export interface GridCell {
  mech_idx: number;
  p: number;
  mu?: [number, number];
  tau?: [number, number];
  rho?: number;
  beta?: number | null;
  alpha?: number | null;
  c_hat?: [number, number] | null;
  sauc?: SaucPayload;
  sop?: [number, number];
  n_unpublished?: number;
  cond_loglik?: number;
  converged?: boolean;
  form?: string;
  curve?: [number, number][] | null;
  error?: string;
}

export interface GridResult {
  mechanisms: Mechanism[];
  p_values: number[];
  curve_kind: string;
  cells: GridCell[];
  cancelled: boolean;
}

export interface FunnelResult {
  points: { id: string; lnDOR: number; inv_sqrt_ess: number }[];
  pooled: number;
  test: { slope: number; se_slope: number; t_value: number; p_value: number };
}

export type MechanismChoice =
  | { kind: "named"; name: "estimated" | "lnDOR" | "sensitivity" | "specificity" }
  | { kind: "custom"; c1: number; c2: number };
