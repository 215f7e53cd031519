import { describe, expect, it } from "vitest";

import {
  forestChart,
  funnelChart,
  gridTableRows,
  mechanismRocChart,
  rocChart,
  saucVsPChart,
} from "../src/charts.js";
import type { DescriptivesResult, FunnelResult, GridResult } from "../src/types.js";
import { fixtureJson } from "./mockService.js";

const grid = fixtureJson<{ result: GridResult }>("sa_grid_job.json").result;
const desc = fixtureJson<{ result: DescriptivesResult }>("descriptives_job.json").result;
const funnel = fixtureJson<{ result: FunnelResult }>("funnel_job.json").result;

describe("rocChart", () => {
  it("draws one point per study with interval bars", () => {
    const svg = rocChart({ scatter: desc.scatter_interval, scatterShape: "interval" });
    expect(svg.querySelectorAll(".study-point").length).toBe(desc.m);
    expect(svg.querySelectorAll(".study-ci").length).toBe(2 * desc.m);
  });

  it("draws confidence regions in region mode", () => {
    const svg = rocChart({ scatter: desc.scatter_region, scatterShape: "region" });
    expect(svg.querySelectorAll(".study-region").length).toBe(desc.m);
  });
});

describe("forestChart", () => {
  it("renders every study row plus the non-pooled footer", () => {
    const series = desc.forest["lnDOR"]!;
    const svg = forestChart(series);
    expect(svg.querySelectorAll(".forest-label").length).toBe(series.rows.length);
    expect(svg.querySelector(".forest-footer")!.textContent).toContain("not pooled");
  });
});

describe("saucVsPChart", () => {
  it("renders one point per grid cell with CI bands per mechanism", () => {
    const svg = saucVsPChart(grid);
    const okCells = grid.cells.filter((c) => !c.error && c.sauc);
    expect(svg.querySelectorAll(".sauc-point").length).toBe(okCells.length);
    expect(svg.querySelectorAll(".ci-band").length).toBe(grid.mechanisms.length);
  });
});

describe("mechanismRocChart", () => {
  it("draws one curve and one trajectory marker per p", () => {
    const svg = mechanismRocChart(grid, 1);
    const cells = grid.cells.filter((c) => c.mech_idx === 1 && !c.error);
    expect(svg.querySelectorAll(".curve").length).toBe(cells.length);
    expect(svg.querySelectorAll(".sop-marker").length).toBe(cells.length);
  });
});

describe("funnelChart", () => {
  it("draws all studies and the pooled reference line", () => {
    const svg = funnelChart(funnel);
    expect(svg.querySelectorAll(".funnel-point").length).toBe(funnel.points.length);
    expect(svg.querySelectorAll(".pooled-line").length).toBe(1);
  });
});

describe("gridTableRows", () => {
  it("emits one row per cell in payload order", () => {
    const { header, rows } = gridTableRows(grid);
    expect(rows.length).toBe(grid.cells.length);
    expect(header[0]).toBe("mechanism");
    expect(rows[0]![0]).toBe(grid.mechanisms[grid.cells[0]!.mech_idx]!.mode);
  });
});
