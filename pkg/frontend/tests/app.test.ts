/**
 * End-to-end workflow against the fixture-backed mock service: upload the
 * bundled dataset, run the default sensitivity grid, check tooltips match
 * the service JSON verbatim, and check the CSV download is byte-equal to
 * the service export.
 */
import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import type { GridResult } from "../src/types.js";
import { fixtureJson, fixtureText, mockService } from "./mockService.js";

function makeApp(opts: Parameters<typeof mockService>[0] = {}) {
  const { fetch, log } = mockService(opts);
  document.body.innerHTML = '<main id="app"></main>';
  const root = document.getElementById("app")!;
  const app = new App(root, new ApiClient("", fetch, ));
  return { app, root, log };
}

async function uploadCovid(app: App, root: HTMLElement) {
  const editor = root.querySelector<HTMLTextAreaElement>(".data-editor")!;
  editor.value = "study,TP,FP,FN,TN\nSteuwe 2020,19,19,0,67\n";
  const status = root.querySelector<HTMLElement>("#studies-status")!;
  const preview = root.querySelector<HTMLElement>("#studies-preview")!;
  const plots = root.querySelector<HTMLElement>("#studies-plots")!;
  await app.uploadAndDescribe(editor.value, status, preview, plots);
}

describe("App workflow", () => {
  beforeEach(() => {
    vi.restoreAllMocks();
  });

  it("builds the four tabs and navigates by keyboard-focusable buttons", () => {
    const { root } = makeApp();
    const tabs = [...root.querySelectorAll('[role="tab"]')];
    expect(tabs.map((t) => t.textContent)).toEqual([
      "Diagnostic Studies",
      "Meta-analysis",
      "Analysis of Publication Bias",
      "Funnel",
    ]);
    (tabs[2] as HTMLButtonElement).click();
    expect(tabs[2]!.getAttribute("aria-selected")).toBe("true");
    expect(
      root.querySelector<HTMLElement>("#panel-bias")!.style.display,
    ).toBe("block");
    expect(
      root.querySelector<HTMLElement>("#panel-studies")!.style.display,
    ).toBe("none");
  });

  it("upload renders the preview with original and transformed data", async () => {
    const { app, root } = makeApp();
    await uploadCovid(app, root);
    const preview = root.querySelector("#studies-preview")!;
    const rows = preview.querySelectorAll("tbody tr");
    expect(rows.length).toBe(69);
    const headerCells = [...preview.querySelectorAll("th")].map(
      (th) => th.textContent,
    );
    for (const col of ["TP", "TN", "y1", "y2", "s1sq", "s2sq"]) {
      expect(headerCells).toContain(col);
    }
    expect(root.querySelectorAll("#studies-plots .study-point").length).toBe(69);
  });

  it("upload errors render inline and leave state unchanged", async () => {
    const { app, root } = makeApp();
    const status = root.querySelector<HTMLElement>("#studies-status")!;
    const preview = root.querySelector<HTMLElement>("#studies-preview")!;
    const plots = root.querySelector<HTMLElement>("#studies-plots")!;
    await app.uploadAndDescribe("TP,FP,FN\n1,2,3\n", status, preview, plots);
    expect(status.textContent).toContain("E_SCHEMA");
    expect(app.state.datasetId).toBeNull();
    expect(preview.querySelectorAll("tr").length).toBe(0);
  });

  it("interval/region toggle re-renders without another upload", async () => {
    const { app, root, log } = makeApp();
    await uploadCovid(app, root);
    const uploadsBefore = log.requests.filter(
      (r) => r.method === "POST" && r.path === "/datasets",
    ).length;
    const regionRadio = [...root.querySelectorAll<HTMLInputElement>(
      'input[name="scatter-shape"]',
    )].find((r) => r.value === "region")!;
    regionRadio.checked = true;
    regionRadio.dispatchEvent(new Event("change"));
    expect(root.querySelectorAll("#studies-plots .study-region").length).toBe(69);
    const uploadsAfter = log.requests.filter(
      (r) => r.method === "POST" && r.path === "/datasets",
    ).length;
    expect(uploadsAfter).toBe(uploadsBefore);
  });

  it("runs the default SA grid; tooltips match service JSON verbatim", async () => {
    const { app, root } = makeApp();
    await uploadCovid(app, root);
    const status = root.querySelector<HTMLElement>("#bias-status")!;
    const out = root.querySelector<HTMLElement>("#bias-output")!;
    await app.runGrid(status, out);

    const payload = fixtureJson<{ result: GridResult }>("sa_grid_job.json").result;
    expect(out.querySelectorAll(".sauc-point").length).toBe(
      payload.cells.filter((c) => !c.error).length,
    );
    // every SAUC tooltip value is the exact payload double
    const tips = [...out.querySelectorAll(".sauc-point")].map(
      (el) => el.getAttribute("data-tip")!,
    );
    for (const cell of payload.cells.filter((c) => !c.error)) {
      const mech = payload.mechanisms[cell.mech_idx]!;
      const tip = tips.find((t) =>
        t.startsWith(`${mech.mode} p=${String(cell.p)}:`),
      );
      expect(tip).toBeDefined();
      expect(tip).toContain(String(cell.sauc!.value));
    }
    // estimates table: one row per cell
    expect(out.querySelectorAll("tbody tr").length).toBe(payload.cells.length);
  });

  it("grid CSV download is byte-equal to the service export", async () => {
    const { app, root } = makeApp();
    await uploadCovid(app, root);
    await app.runGrid(
      root.querySelector<HTMLElement>("#bias-status")!,
      root.querySelector<HTMLElement>("#bias-output")!,
    );
    const captured: Blob[] = [];
    // jsdom's URL lacks the object-URL statics; add capturing shims
    (URL as any).createObjectURL = (b: Blob) => {
      captured.push(b);
      return "blob:mock";
    };
    (URL as any).revokeObjectURL = () => {};
    try {
      root.querySelector<HTMLButtonElement>("#export-csv")!.click();
      await vi.waitFor(() => expect(captured.length).toBe(1));
      expect(await captured[0]!.text()).toBe(fixtureText("sa_grid.csv"));
    } finally {
      delete (URL as any).createObjectURL;
      delete (URL as any).revokeObjectURL;
    }
  });

  it("reuses the cached grid job instead of re-enqueueing", async () => {
    const { app, root, log } = makeApp();
    await uploadCovid(app, root);
    const status = root.querySelector<HTMLElement>("#bias-status")!;
    const out = root.querySelector<HTMLElement>("#bias-output")!;
    await app.runGrid(status, out);
    const enqueues = () =>
      log.requests.filter((r) => r.method === "POST" && r.path.endsWith("/analyses"))
        .length;
    const before = enqueues();
    await app.runGrid(status, out);
    expect(enqueues()).toBe(before);
    expect(status.textContent).toContain("served from cache");
  });

  it("a job cancelled mid-poll never renders", async () => {
    const { app, root } = makeApp({
      pending: { sa_grid: ["running", "running"] },
      onPoll: (jobId, nth) => {
        if (jobId === "job-sa_grid" && nth === 1) {
          root.querySelector<HTMLButtonElement>("#bias-status .cancel-btn")?.click();
        }
      },
    });
    await uploadCovid(app, root);
    const status = root.querySelector<HTMLElement>("#bias-status")!;
    const out = root.querySelector<HTMLElement>("#bias-output")!;
    await app.runGrid(status, out);
    expect(out.querySelectorAll(".sauc-point").length).toBe(0);
    expect(app.lastGrid).toBeNull();
    expect(status.textContent).toContain("cancelled");
  });

  it("meta tab renders estimates verbatim from the fit payload", async () => {
    const { app, root } = makeApp();
    await uploadCovid(app, root);
    const status = root.querySelector<HTMLElement>("#meta-status")!;
    const out = root.querySelector<HTMLElement>("#meta-output")!;
    await app.runMeta("reitsma-ml", "sroc", status, out);
    const fit = fixtureJson<{ result: { sauc: { value: number } } }>(
      "reitsma_job.json",
    ).result;
    expect(out.textContent).toContain(String(fit.sauc.value));
    expect(out.querySelectorAll(".curve").length).toBe(1);
    expect(out.querySelectorAll(".sop-marker").length).toBe(1);
  });

  it("funnel tab renders the test table", async () => {
    const { app, root } = makeApp();
    await uploadCovid(app, root);
    const status = root.querySelector<HTMLElement>("#funnel-status")!;
    const out = root.querySelector<HTMLElement>("#funnel-output")!;
    await app.runFunnel(status, out);
    const payload = fixtureJson<{ result: { test: { p_value: number } } }>(
      "funnel_job.json",
    ).result;
    expect(out.textContent).toContain(String(payload.test.p_value));
    expect(out.querySelectorAll(".funnel-point").length).toBe(69);
  });
});
