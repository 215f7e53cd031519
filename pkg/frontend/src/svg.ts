/** Hand-rolled SVG primitives: elements, linear scales, axes. */

export const SVG_NS = "http://www.w3.org/2000/svg";

export function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
  ...children: (SVGElement | string)[]
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, String(v));
  for (const child of children) {
    el.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return el;
}

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const f = ((v: number) => r0 + ((v - d0) / (d1 - d0)) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

export interface Frame {
  svg: SVGSVGElement;
  plot: SVGGElement;
  x: Scale;
  y: Scale;
  width: number;
  height: number;
}

export interface FrameOptions {
  width?: number;
  height?: number;
  margin?: { top: number; right: number; bottom: number; left: number };
  xDomain: [number, number];
  yDomain: [number, number];
  xLabel?: string;
  yLabel?: string;
  xTicks?: number[];
  yTicks?: number[];
  /** tick label formatter for layout text only (axis grid, not data) */
  tickText?: (v: number) => string;
}

const DEFAULT_MARGIN = { top: 12, right: 14, bottom: 38, left: 48 };

export function chartFrame(opts: FrameOptions): Frame {
  const width = opts.width ?? 420;
  const height = opts.height ?? 340;
  const m = opts.margin ?? DEFAULT_MARGIN;
  const x = linearScale(opts.xDomain, [m.left, width - m.right]);
  const y = linearScale(opts.yDomain, [height - m.bottom, m.top]);
  const tickText = opts.tickText ?? ((v: number) => String(v));

  const svg = svgEl("svg", {
    viewBox: `0 0 ${width} ${height}`,
    width,
    height,
    role: "img",
    class: "chart",
  });
  const plot = svgEl("g", { class: "plot" });

  const axes = svgEl("g", { class: "axes" });
  axes.append(
    svgEl("line", {
      x1: x.range[0], y1: y.range[0], x2: x.range[1], y2: y.range[0],
      stroke: "#444",
    }),
    svgEl("line", {
      x1: x.range[0], y1: y.range[0], x2: x.range[0], y2: y.range[1],
      stroke: "#444",
    }),
  );
  const xTicks = opts.xTicks ?? defaultTicks(opts.xDomain);
  const yTicks = opts.yTicks ?? defaultTicks(opts.yDomain);
  for (const t of xTicks) {
    axes.append(
      svgEl("line", { x1: x(t), y1: y.range[0], x2: x(t), y2: y.range[0] + 4, stroke: "#444" }),
      svgEl("text", {
        x: x(t), y: y.range[0] + 16, "text-anchor": "middle", class: "tick",
      }, tickText(t)),
    );
  }
  for (const t of yTicks) {
    axes.append(
      svgEl("line", { x1: x.range[0] - 4, y1: y(t), x2: x.range[0], y2: y(t), stroke: "#444" }),
      svgEl("text", {
        x: x.range[0] - 7, y: y(t) + 3.5, "text-anchor": "end", class: "tick",
      }, tickText(t)),
    );
  }
  if (opts.xLabel) {
    axes.append(svgEl("text", {
      x: (x.range[0] + x.range[1]) / 2, y: height - 6,
      "text-anchor": "middle", class: "axis-label",
    }, opts.xLabel));
  }
  if (opts.yLabel) {
    const lx = 12;
    const ly = (y.range[0] + y.range[1]) / 2;
    axes.append(svgEl("text", {
      x: lx, y: ly, "text-anchor": "middle", class: "axis-label",
      transform: `rotate(-90 ${lx} ${ly})`,
    }, opts.yLabel));
  }
  svg.append(axes, plot);
  return { svg, plot, x, y, width, height };
}

function defaultTicks([lo, hi]: [number, number]): number[] {
  const ticks: number[] = [];
  const step = (hi - lo) / 5;
  for (let k = 0; k <= 5; k++) ticks.push(Number((lo + k * step).toFixed(6)));
  return ticks;
}

export function polylinePath(points: [number, number][], x: Scale, y: Scale): string {
  return points
    .map(([px, py], i) => `${i === 0 ? "M" : "L"}${x(px).toFixed(2)},${y(py).toFixed(2)}`)
    .join("");
}

/** Attach a hover/focus tooltip carrying exact payload text. */
export function withTip<E extends SVGElement>(el: E, tip: string): E {
  el.setAttribute("data-tip", tip);
  el.setAttribute("tabindex", "0");
  el.append(svgEl("title", {}, tip));
  return el;
}

export function serializeSvg(svg: SVGSVGElement): string {
  return new XMLSerializer().serializeToString(svg);
}

export const SERIES_COLORS = ["#1965b0", "#dc050c", "#4eb265", "#b17ba6", "#f4a736", "#777777"];
