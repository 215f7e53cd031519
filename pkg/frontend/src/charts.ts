/**
 * Chart builders: service payloads in, SVG out.
 *
 * Coordinates are scaled for layout; every number shown to the user
 * (tooltips, labels) is rendered verbatim from the payload via `show`.
 */
import { SERIES_COLORS, chartFrame, polylinePath, svgEl, withTip } from "./svg.js";
import type {
  ForestSeries,
  FunnelResult,
  GridCell,
  GridResult,
  ScatterPoint,
} from "./types.js";
import { show } from "./verbatim.js";

export interface RocSeries {
  label: string;
  points: [number, number][];
  color?: string;
  tip?: string;
}

export interface RocMarker {
  fpr: number;
  se: number;
  label: string;
  color?: string;
  shape?: "circle" | "diamond";
}

export function rocChart(opts: {
  scatter?: ScatterPoint[];
  scatterShape?: "interval" | "region";
  series?: RocSeries[];
  markers?: RocMarker[];
  sopRegion?: [number, number][];
  width?: number;
  height?: number;
}): SVGSVGElement {
  const frame = chartFrame({
    xDomain: [0, 1],
    yDomain: [0, 1],
    xLabel: "false positive rate",
    yLabel: "sensitivity",
    width: opts.width,
    height: opts.height,
  });
  const { plot, x, y } = frame;

  for (const d of opts.scatter ?? []) {
    if (opts.scatterShape === "region" && d.region) {
      plot.append(
        withTip(
          svgEl("path", {
            d: polylinePath(d.region, x, y) + "Z",
            fill: "rgba(25,101,176,0.10)",
            stroke: "rgba(25,101,176,0.45)",
            class: "study-region",
          }),
          `${d.id}: FPR ${show(d.fpr)}, Se ${show(d.se)}`,
        ),
      );
    } else if (d.fpr_lo !== undefined && d.se_lo !== undefined) {
      plot.append(
        svgEl("line", {
          x1: x(d.fpr_lo), y1: y(d.se), x2: x(d.fpr_hi ?? d.fpr), y2: y(d.se),
          stroke: "rgba(25,101,176,0.5)", class: "study-ci",
        }),
        svgEl("line", {
          x1: x(d.fpr), y1: y(d.se_lo), x2: x(d.fpr), y2: y(d.se_hi ?? d.se),
          stroke: "rgba(25,101,176,0.5)", class: "study-ci",
        }),
      );
    }
    plot.append(
      withTip(
        svgEl("circle", {
          cx: x(d.fpr), cy: y(d.se), r: 2.6,
          fill: "#1965b0", "fill-opacity": 0.75, class: "study-point",
        }),
        `${d.id}: FPR ${show(d.fpr)}, Se ${show(d.se)}`,
      ),
    );
  }

  if (opts.sopRegion) {
    plot.append(
      svgEl("path", {
        d: polylinePath(opts.sopRegion, x, y) + "Z",
        fill: "rgba(220,5,12,0.12)",
        stroke: "rgba(220,5,12,0.6)",
        class: "sop-region",
      }),
    );
  }

  (opts.series ?? []).forEach((s, i) => {
    const color = s.color ?? SERIES_COLORS[i % SERIES_COLORS.length]!;
    plot.append(
      withTip(
        svgEl("path", {
          d: polylinePath(s.points, x, y),
          fill: "none", stroke: color, "stroke-width": 1.8, class: "curve",
        }),
        s.tip ?? s.label,
      ),
    );
  });

  (opts.markers ?? []).forEach((m, i) => {
    const color = m.color ?? SERIES_COLORS[i % SERIES_COLORS.length]!;
    const el =
      m.shape === "diamond"
        ? svgEl("rect", {
            x: x(m.fpr) - 3.4, y: y(m.se) - 3.4, width: 6.8, height: 6.8,
            transform: `rotate(45 ${x(m.fpr)} ${y(m.se)})`,
            fill: color, class: "sop-marker",
          })
        : svgEl("circle", { cx: x(m.fpr), cy: y(m.se), r: 4, fill: color, class: "sop-marker" });
    plot.append(withTip(el, m.label));
  });

  return frame.svg;
}

export function forestChart(series: ForestSeries, width = 460): SVGSVGElement {
  const rows = series.rows;
  const rowH = 16;
  const height = rows.length * rowH + 58;
  const lo = Math.min(...rows.map((r) => r.lo));
  const hi = Math.max(...rows.map((r) => r.hi));
  const pad = (hi - lo || 1) * 0.05;
  const frame = chartFrame({
    width,
    height,
    margin: { top: 8, right: 14, bottom: 34, left: 128 },
    xDomain: [lo - pad, hi + pad],
    yDomain: [rows.length, -1],
    xLabel: series.metric,
    yTicks: [],
    tickText: (v) => v.toPrecision(3),
  });
  const { plot, x, y } = frame;
  rows.forEach((r, i) => {
    const cy = y(i);
    const tip = `${r.id}: ${show(r.est)} [${show(r.lo)}, ${show(r.hi)}]`;
    plot.append(
      svgEl("text", {
        x: 4, y: cy + 3.5, class: "forest-label", "text-anchor": "start",
      }, r.id),
      withTip(
        svgEl("g", {},
          svgEl("line", { x1: x(r.lo), y1: cy, x2: x(r.hi), y2: cy, stroke: "#333" }),
          svgEl("rect", {
            x: x(r.est) - 2.6, y: cy - 2.6, width: 5.2, height: 5.2, fill: "#1965b0",
          }),
        ),
        tip,
      ),
    );
  });
  const f = series.footer;
  frame.svg.append(
    svgEl("text", {
      x: frame.width / 2, y: height - 4, "text-anchor": "middle", class: "forest-footer",
    }, `study summaries (not pooled): min ${show(f.min)}, median ${show(f.median)}, max ${show(f.max)}`),
  );
  return frame.svg;
}

/** SAUC against p with its confidence band, one series per mechanism. */
export function saucVsPChart(grid: GridResult, width = 460, height = 320): SVGSVGElement {
  const frame = chartFrame({
    width,
    height,
    xDomain: [Math.min(...grid.p_values), 1],
    yDomain: [0, 1],
    xLabel: "marginal selection probability p",
    yLabel: "SAUC",
  });
  const { plot, x, y } = frame;
  plot.append(
    svgEl("line", {
      x1: x.range[0], y1: y(0.5), x2: x.range[1], y2: y(0.5),
      stroke: "#bbb", "stroke-dasharray": "4 3", class: "baseline",
    }),
  );
  grid.mechanisms.forEach((mech, mi) => {
    const color = SERIES_COLORS[mi % SERIES_COLORS.length]!;
    const cells = grid.cells
      .filter((c) => c.mech_idx === mi && c.sauc && !c.error)
      .sort((a, b) => b.p - a.p);
    if (!cells.length) return;
    const band: [number, number][] = [
      ...cells.map((c) => [c.p, c.sauc!.hi] as [number, number]),
      ...[...cells].reverse().map((c) => [c.p, c.sauc!.lo] as [number, number]),
    ];
    plot.append(
      svgEl("path", {
        d: polylinePath(band, x, y) + "Z",
        fill: color, "fill-opacity": 0.12, stroke: "none", class: "ci-band",
      }),
      svgEl("path", {
        d: polylinePath(cells.map((c) => [c.p, c.sauc!.value]), x, y),
        fill: "none", stroke: color, "stroke-width": 1.8, class: "sauc-line",
      }),
    );
    for (const c of cells) {
      plot.append(
        withTip(
          svgEl("circle", {
            cx: x(c.p), cy: y(c.sauc!.value), r: 4, fill: color, class: "sauc-point",
          }),
          `${mech.mode} p=${show(c.p)}: SAUC ${show(c.sauc!.value)} [${show(c.sauc!.lo)}, ${show(c.sauc!.hi)}]`,
        ),
      );
    }
  });
  return frame.svg;
}

/** Per-mechanism ROC panel: one curve per p plus the SOP trajectory. */
export function mechanismRocChart(
  grid: GridResult,
  mechIdx: number,
  scatter?: ScatterPoint[],
): SVGSVGElement {
  const mech = grid.mechanisms[mechIdx]!;
  const cells = grid.cells
    .filter((c) => c.mech_idx === mechIdx && !c.error)
    .sort((a, b) => b.p - a.p);
  const series: RocSeries[] = cells
    .filter((c) => c.curve)
    .map((c, i) => ({
      label: `p=${show(c.p)}`,
      points: c.curve!,
      color: SERIES_COLORS[i % SERIES_COLORS.length]!,
      tip: `${mech.mode} p=${show(c.p)}: SAUC ${show(c.sauc?.value)}`,
    }));
  const markers: RocMarker[] = cells
    .filter((c) => c.sop)
    .map((c, i) => ({
      fpr: 1 - c.sop![1],
      se: c.sop![0],
      label: `${mech.mode} p=${show(c.p)}: Se ${show(c.sop![0])}, Sp ${show(c.sop![1])}`,
      color: SERIES_COLORS[i % SERIES_COLORS.length]!,
      shape: "diamond",
    }));
  return rocChart({ scatter, scatterShape: "interval", series, markers, width: 380, height: 320 });
}

export function funnelChart(result: FunnelResult, width = 440, height = 340): SVGSVGElement {
  const xs = result.points.map((p) => p.lnDOR);
  const ys = result.points.map((p) => p.inv_sqrt_ess);
  const padX = (Math.max(...xs) - Math.min(...xs) || 1) * 0.06;
  const yMax = Math.max(...ys) * 1.08;
  const frame = chartFrame({
    width,
    height,
    xDomain: [Math.min(...xs) - padX, Math.max(...xs) + padX],
    yDomain: [yMax, 0],  // precision axis points up toward 0 (larger studies)
    xLabel: "lnDOR",
    yLabel: "1 / sqrt(effective sample size)",
    tickText: (v) => v.toPrecision(2),
  });
  const { plot, x, y } = frame;
  plot.append(
    withTip(
      svgEl("line", {
        x1: x(result.pooled), y1: y.range[0], x2: x(result.pooled), y2: y.range[1],
        stroke: "#dc050c", "stroke-dasharray": "5 3", class: "pooled-line",
      }),
      `pooled lnDOR ${show(result.pooled)}`,
    ),
  );
  for (const p of result.points) {
    plot.append(
      withTip(
        svgEl("circle", {
          cx: x(p.lnDOR), cy: y(p.inv_sqrt_ess), r: 3,
          fill: "#1965b0", "fill-opacity": 0.75, class: "funnel-point",
        }),
        `${p.id}: lnDOR ${show(p.lnDOR)}, precision ${show(p.inv_sqrt_ess)}`,
      ),
    );
  }
  return frame.svg;
}

/** Rows for the estimates table, one per grid cell, payload-verbatim. */
export function gridTableRows(grid: GridResult): {
  cells: GridCell[];
  header: string[];
  rows: string[][];
} {
  const header = [
    "mechanism", "p", "mu1", "mu2", "tau1", "tau2", "rho",
    "beta", "c1", "c2", "SAUC", "lo", "hi", "Se", "Sp", "unpublished",
  ];
  const rows = grid.cells.map((c) => {
    const mech = grid.mechanisms[c.mech_idx]!;
    if (c.error) {
      return [mech.mode, show(c.p), c.error, ...Array(header.length - 3).fill("")];
    }
    const [c1, c2] = c.c_hat ?? [mech.c1, mech.c2];
    return [
      mech.mode, show(c.p),
      show(c.mu?.[0]), show(c.mu?.[1]),
      show(c.tau?.[0]), show(c.tau?.[1]), show(c.rho),
      c.beta === null || c.beta === undefined ? "" : show(c.beta),
      show(c1), show(c2),
      show(c.sauc?.value), show(c.sauc?.lo), show(c.sauc?.hi),
      show(c.sop?.[0]), show(c.sop?.[1]),
      c.n_unpublished === undefined ? "" : String(c.n_unpublished),
    ];
  });
  return { cells: grid.cells, header, rows };
}
