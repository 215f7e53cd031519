/**
 * The four-tab application: Diagnostic Studies, Meta-analysis, Analysis
 * of Publication Bias, Funnel.  All statistics arrive from the service;
 * the client renders payloads and never computes numbers.
 */
import { ApiClient, ApiError } from "./api.js";
import {
  forestChart,
  funnelChart,
  gridTableRows,
  mechanismRocChart,
  rocChart,
  saucVsPChart,
} from "./charts.js";
import {
  clear,
  downloadBlob,
  downloadText,
  h,
  installTooltip,
  sortableTable,
  statusBadge,
} from "./dom.js";
import {
  SessionState,
  TabName,
  findGridJob,
  gridSpec,
  initialState,
  jobKey,
  markCancelled,
  mayRender,
  parsePGrid,
  rememberJob,
  setDataset,
} from "./state.js";
import { serializeSvg } from "./svg.js";
import type {
  DescriptivesResult,
  FitResult,
  FunnelResult,
  GridResult,
  JobSnapshot,
  MechanismChoice,
} from "./types.js";
import { show } from "./verbatim.js";

const TABS: { id: TabName; label: string }[] = [
  { id: "studies", label: "Diagnostic Studies" },
  { id: "meta", label: "Meta-analysis" },
  { id: "bias", label: "Analysis of Publication Bias" },
  { id: "funnel", label: "Funnel" },
];

const EXAMPLE_CSV = `study,TP,FP,FN,TN
Example A,80,10,20,90
Example B,62,14,18,78
Example C,94,8,12,118
`;

export class App {
  state: SessionState = initialState();
  descriptives: { jobId: string; result: DescriptivesResult } | null = null;
  lastFit: { jobId: string; result: FitResult } | null = null;
  lastGrid: { jobId: string; result: GridResult } | null = null;
  lastFunnel: { jobId: string; result: FunnelResult } | null = null;

  private panels: Record<TabName, HTMLElement>;
  private tabButtons: Record<TabName, HTMLButtonElement>;

  constructor(
    readonly root: HTMLElement,
    readonly api: ApiClient,
  ) {
    this.panels = {} as Record<TabName, HTMLElement>;
    this.tabButtons = {} as Record<TabName, HTMLButtonElement>;
    this.buildShell();
    installTooltip(root);
    this.renderStudiesTab();
    this.renderMetaTab();
    this.renderBiasTab();
    this.renderFunnelTab();
    this.selectTab("studies");
  }

  private buildShell(): void {
    const nav = h("nav", { role: "tablist", class: "tabs" });
    for (const tab of TABS) {
      const btn = h("button", {
        type: "button",
        role: "tab",
        id: `tab-${tab.id}`,
        "aria-controls": `panel-${tab.id}`,
        class: "tab-btn",
        onclick: () => this.selectTab(tab.id),
      }, tab.label);
      this.tabButtons[tab.id] = btn;
      nav.append(btn);
    }
    this.root.append(h("header", {}, h("h1", {}, "Diagnostic accuracy meta-analysis"), nav));
    for (const tab of TABS) {
      const panel = h("section", {
        id: `panel-${tab.id}`,
        role: "tabpanel",
        "aria-labelledby": `tab-${tab.id}`,
        class: "panel",
      });
      this.panels[tab.id] = panel;
      this.root.append(panel);
    }
  }

  selectTab(tab: TabName): void {
    this.state = { ...this.state, activeTab: tab };
    for (const t of TABS) {
      this.panels[t.id].style.display = t.id === tab ? "block" : "none";
      this.tabButtons[t.id].setAttribute("aria-selected", String(t.id === tab));
    }
  }

  /** Enqueue (or reuse) a job, poll it, and ignore it if cancelled. */
  private async runJob<R>(
    kind: string,
    options: object,
    status: HTMLElement,
    reuseKey?: string,
  ): Promise<{ jobId: string; result: R } | null> {
    if (!this.state.datasetId) {
      clear(status).append(statusBadge("upload a dataset first", "warn"));
      return null;
    }
    const datasetId = this.state.datasetId;
    let jobId = reuseKey ? this.state.jobCache[reuseKey] : undefined;
    try {
      if (!jobId) {
        jobId = await this.api.enqueue(datasetId, kind, options);
        this.state = rememberJob(this.state, kind, options, jobId);
      }
      const theJob = jobId;
      clear(status).append(
        statusBadge("running"),
        h("button", {
          type: "button",
          class: "cancel-btn",
          onclick: () => {
            this.state = markCancelled(this.state, theJob);
            void this.api.cancelJob(theJob);
            clear(status).append(statusBadge("cancelled", "warn"));
          },
        }, "cancel"),
        h("span", { class: "progress" }),
      );
      const progressEl = status.querySelector(".progress")!;
      const snap: JobSnapshot<R> = await this.api.waitForJob<R>(jobId, {
        onProgress: (p) => {
          progressEl.textContent = p ? ` ${p}` : "";
        },
      });
      if (!mayRender(this.state, jobId)) {
        return null; // stale: cancelled while polling
      }
      if (snap.state === "failed") {
        clear(status).append(statusBadge(snap.error ?? "failed", "error"));
        return null;
      }
      if (snap.state === "cancelled") {
        clear(status).append(statusBadge("cancelled", "warn"));
        return null;
      }
      clear(status).append(statusBadge("done"));
      return { jobId, result: snap.result as R };
    } catch (err) {
      const msg = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      clear(status).append(statusBadge(msg, "error"));
      return null;
    }
  }

  // ---------------------------------------------------------------- studies

  private renderStudiesTab(): void {
    const panel = this.panels.studies;
    const editor = h("textarea", {
      class: "data-editor",
      rows: 12,
      "aria-label": "Edit data (CSV with TP, FP, FN, TN columns)",
    }) as HTMLTextAreaElement;
    editor.value = EXAMPLE_CSV;

    const fileInput = h("input", {
      type: "file",
      accept: ".csv,.tsv,.txt",
      "aria-label": "upload CSV or TXT file",
    }) as HTMLInputElement;
    fileInput.addEventListener("change", () => {
      const file = fileInput.files?.[0];
      if (!file) return;
      void file.text().then((text) => {
        editor.value = text;
      });
    });

    const status = h("div", { class: "status", id: "studies-status" });
    const preview = h("div", { class: "preview", id: "studies-preview" });
    const plots = h("div", { class: "plots", id: "studies-plots" });

    const shapeToggle = h("fieldset", { class: "inline-options" },
      h("legend", {}, "study uncertainty"),
      ...(["interval", "region"] as const).map((shape) =>
        h("label", {},
          Object.assign(
            h("input", {
              type: "radio",
              name: "scatter-shape",
              value: shape,
              onchange: () => {
                this.state = { ...this.state, scatterShape: shape };
                this.paintStudies(preview, plots); // re-render, no re-upload
              },
            }) as HTMLInputElement,
            { checked: this.state.scatterShape === shape },
          ),
          ` ${shape}`,
        ),
      ),
    );

    const updateBtn = h("button", {
      type: "button",
      class: "primary",
      id: "update-data",
      onclick: () => void this.uploadAndDescribe(editor.value, status, preview, plots),
    }, "Update data and results");

    panel.append(
      h("p", { class: "hint" },
        "Paste or upload per-study 2x2 counts (columns TP, FP, FN, TN, optional study id). ",
        "Zero-cell studies get the 0.5 continuity correction automatically."),
      h("div", { class: "edit-area" },
        h("h2", {}, "Edit data"), fileInput, editor, updateBtn, status),
      shapeToggle,
      preview,
      plots,
    );
  }

  async uploadAndDescribe(
    csv: string,
    status: HTMLElement,
    preview: HTMLElement,
    plots: HTMLElement,
  ): Promise<void> {
    try {
      const created = await this.api.uploadCsv(csv);
      this.state = setDataset(this.state, created.id, created.m, created.warnings);
      this.descriptives = null;
      this.lastFit = null;
      this.lastGrid = null;
      this.lastFunnel = null;
      clear(status).append(
        statusBadge(`dataset ${created.id}, ${String(created.m)} studies`),
        ...created.warnings.map((w) => statusBadge(w, "warn")),
      );
    } catch (err) {
      const msg = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      clear(status).append(statusBadge(msg, "error"));
      return; // invalid upload leaves previous state untouched
    }
    const run = await this.runJob<DescriptivesResult>(
      "descriptives",
      { alpha: 0.05, correction: "zero-studies-only" },
      status,
    );
    if (!run) return;
    this.descriptives = run;
    this.paintStudies(preview, plots);
  }

  paintStudies(preview: HTMLElement, plots: HTMLElement): void {
    if (!this.descriptives) return;
    const d = this.descriptives.result;

    const header = ["study", "TP", "FP", "FN", "TN", "corrected", "y1", "y2", "s1sq", "s2sq"];
    const rows = d.original.studies.map((s, i) => {
      const t = d.transformed[i]!;
      return [
        s.id, String(s.tp), String(s.fp), String(s.fn), String(s.tn),
        d.corrected_flags[i] ? "yes" : "",
        show(t.y1), show(t.y2), show(t.s1sq), show(t.s2sq),
      ];
    });
    clear(preview).append(
      h("h2", {}, "Data preview"),
      h("p", { class: "hint" }, `original and logit-transformed data, ${String(d.m)} studies`),
      sortableTable(header, rows),
    );

    const scatter =
      this.state.scatterShape === "region" ? d.scatter_region : d.scatter_interval;
    const metricSelect = h("select", { "aria-label": "forest metric" }) as HTMLSelectElement;
    for (const m of Object.keys(d.forest)) {
      metricSelect.append(h("option", { value: m }, m));
    }
    const forestBox = h("div", { class: "forest-box" });
    const paintForest = () => {
      const series = d.forest[metricSelect.value]!;
      clear(forestBox).append(forestChart(series));
    };
    metricSelect.addEventListener("change", paintForest);

    clear(plots).append(
      h("div", { class: "chart-box" },
        h("h2", {}, "ROC scatter"),
        rocChart({ scatter, scatterShape: this.state.scatterShape })),
      h("div", { class: "chart-box" },
        h("h2", {}, "Forest plot"),
        h("label", {}, "metric ", metricSelect),
        forestBox),
    );
    paintForest();
  }

  // ------------------------------------------------------------------- meta

  private renderMetaTab(): void {
    const panel = this.panels.meta;
    const status = h("div", { class: "status", id: "meta-status" });
    const out = h("div", { id: "meta-output" });

    const modelSelect = h("select", { "aria-label": "model" },
      h("option", { value: "reitsma-ml" }, "bivariate normal, ML"),
      h("option", { value: "reitsma-reml" }, "bivariate normal, REML"),
      h("option", { value: "glmm" }, "binomial GLMM (no correction)"),
    ) as HTMLSelectElement;
    const curveSelect = h("select", { "aria-label": "curve kind" },
      h("option", { value: "sroc" }, "SROC"),
      h("option", { value: "hsroc" }, "HSROC"),
    ) as HTMLSelectElement;

    panel.append(
      h("div", { class: "controls" },
        h("label", {}, "model ", modelSelect),
        h("label", {}, "curve ", curveSelect),
        h("button", {
          type: "button", class: "primary", id: "run-meta",
          onclick: () => void this.runMeta(modelSelect.value, curveSelect.value, status, out),
        }, "Estimate"),
        status,
      ),
      out,
    );
  }

  async runMeta(
    model: string,
    curve: string,
    status: HTMLElement,
    out: HTMLElement,
  ): Promise<void> {
    const kind = model === "glmm" ? "glmm" : "reitsma";
    const options: Record<string, unknown> = { curve };
    if (kind === "reitsma") {
      options.method = model.endsWith("reml") ? "reml" : "ml";
      options.correction = "zero-studies-only";
    } else {
      options.nodes_per_dim = 7;
    }
    const key = this.state.datasetId
      ? jobKey(this.state.datasetId, kind, options)
      : undefined;
    const run = await this.runJob<FitResult>(kind, options, status, key);
    if (!run) return;
    this.lastFit = run;
    this.paintMeta(out);
  }

  paintMeta(out: HTMLElement): void {
    if (!this.lastFit) return;
    const r = this.lastFit.result;
    const scatter = this.descriptives?.result.scatter_interval;
    const rows: string[][] = [
      ["method", r.fit.method],
      ["mu1 (logit Se)", show(r.fit.mu[0])],
      ["mu2 (logit Sp)", show(r.fit.mu[1])],
      ["tau1", show(r.fit.tau[0])],
      ["tau2", show(r.fit.tau[1])],
      ["rho", show(r.fit.rho)],
      ["log-likelihood", show(r.fit.loglik)],
      ["summary Se", show(r.sop.se)],
      ["summary Sp", show(r.sop.sp)],
      [`SAUC (${r.sauc.kind})`, `${show(r.sauc.value)} [${show(r.sauc.lo)}, ${show(r.sauc.hi)}]`],
      ["converged", String(r.fit.converged)],
    ];
    const chart = rocChart({
      scatter,
      scatterShape: "interval",
      series: [{
        label: r.sroc.kind,
        points: r.sroc.points,
        tip: `${r.sroc.kind}: SAUC ${show(r.sauc.value)} [${show(r.sauc.lo)}, ${show(r.sauc.hi)}]`,
      }],
      markers: [{
        fpr: 1 - r.sop.sp, se: r.sop.se,
        label: `SOP: Se ${show(r.sop.se)}, Sp ${show(r.sop.sp)}`,
      }],
      sopRegion: r.sop.region,
    });
    clear(out).append(
      h("div", { class: "chart-box" }, chart,
        h("button", {
          type: "button",
          onclick: () => downloadText(serializeSvg(chart), "sroc.svg"),
        }, "Download SVG")),
      h("div", { class: "table-box" },
        h("h2", {}, "Estimates"),
        sortableTable(["parameter", "value"], rows)),
    );
  }

  // ------------------------------------------------------------------- bias

  private renderBiasTab(): void {
    const panel = this.panels.bias;
    const status = h("div", { class: "status", id: "bias-status" });
    const out = h("div", { id: "bias-output" });

    const mechBoxes = (["estimated", "lnDOR", "sensitivity", "specificity"] as const).map(
      (name) => {
        const cb = h("input", { type: "checkbox", value: name }) as HTMLInputElement;
        cb.checked = true;
        return { name, cb };
      },
    );
    const customC1 = h("input", {
      type: "number", step: "0.01", min: "0", value: "0.5",
      "aria-label": "custom c1",
    }) as HTMLInputElement;
    const customC2 = h("input", {
      type: "number", step: "0.01", min: "0", value: "0.5",
      "aria-label": "custom c2",
    }) as HTMLInputElement;
    const customOn = h("input", { type: "checkbox" }) as HTMLInputElement;

    const pInput = h("input", {
      type: "text", value: this.state.pGrid.join(", "),
      "aria-label": "p grid (descending from 1)",
    }) as HTMLInputElement;
    const curveSelect = h("select", { "aria-label": "curve kind" },
      h("option", { value: "sroc" }, "SROC"),
      h("option", { value: "hsroc" }, "HSROC"),
    ) as HTMLSelectElement;

    panel.append(
      h("div", { class: "controls" },
        h("fieldset", { class: "inline-options" },
          h("legend", {}, "selective-publication mechanisms"),
          ...mechBoxes.map(({ name, cb }) => h("label", {}, cb, ` ${name}`)),
          h("label", {}, customOn, " custom (c1, c2): ", customC1, customC2),
        ),
        h("label", {}, "p grid ", pInput),
        h("label", {}, "curve ", curveSelect),
        h("button", {
          type: "button", class: "primary", id: "run-sa",
          onclick: () => {
            const parsed = parsePGrid(pInput.value);
            if (typeof parsed === "string") {
              clear(status).append(statusBadge(parsed, "error"));
              return;
            }
            const mechanisms: MechanismChoice[] = mechBoxes
              .filter(({ cb }) => cb.checked)
              .map(({ name }) => ({ kind: "named", name }));
            if (customOn.checked) {
              mechanisms.push({
                kind: "custom",
                c1: Number(customC1.value),
                c2: Number(customC2.value),
              });
            }
            if (!mechanisms.length) {
              clear(status).append(statusBadge("choose at least one mechanism", "error"));
              return;
            }
            this.state = {
              ...this.state,
              pGrid: parsed,
              mechanisms,
              model: { ...this.state.model, curve: curveSelect.value as "sroc" | "hsroc" },
            };
            void this.runGrid(status, out);
          },
        }, "Run sensitivity analysis"),
        status,
      ),
      out,
    );
  }

  async runGrid(status: HTMLElement, out: HTMLElement): Promise<void> {
    const spec = gridSpec(this.state);
    const reusable = findGridJob(this.state, spec);
    if (reusable && this.lastGrid?.jobId === reusable) {
      clear(status).append(statusBadge("served from cache"));
      this.paintGrid(out);
      return;
    }
    const key = this.state.datasetId
      ? jobKey(this.state.datasetId, "sa_grid", spec)
      : undefined;
    const run = await this.runJob<GridResult>("sa_grid", spec, status, key);
    if (!run) return;
    this.lastGrid = run;
    this.paintGrid(out);
  }

  paintGrid(out: HTMLElement): void {
    if (!this.lastGrid) return;
    const grid = this.lastGrid.result;
    const jobId = this.lastGrid.jobId;
    const scatter = this.descriptives?.result.scatter_interval;

    const mechPanels = grid.mechanisms.map((mech, mi) => {
      const failed = grid.cells.filter((c) => c.mech_idx === mi && c.error);
      return h("div", { class: "chart-box" },
        h("h3", {}, `${mech.mode} (c1 ${show(mech.c1)}, c2 ${show(mech.c2)})`),
        mechanismRocChart(grid, mi, scatter),
        failed.length
          ? h("p", { class: "cell-errors" },
              ...failed.map((c) => statusBadge(`p=${show(c.p)}: ${c.error!}`, "error")))
          : null,
      );
    });

    const saucChart = saucVsPChart(grid);
    const { header, rows } = gridTableRows(grid);

    const exportBar = h("div", { class: "export-bar" },
      h("button", {
        type: "button",
        id: "export-csv",
        onclick: () => void this.api.exportJob(jobId, "csv").then(
          (b) => downloadBlob(b, "sensitivity_grid.csv")),
      }, "Download CSV"),
      h("button", {
        type: "button",
        id: "export-json",
        onclick: () => void this.api.exportJob(jobId, "json").then(
          (b) => downloadBlob(b, "sensitivity_grid.json")),
      }, "Download JSON"),
      h("button", {
        type: "button",
        onclick: () => downloadText(serializeSvg(saucChart), "sauc_vs_p.svg"),
      }, "Download SVG"),
    );

    clear(out).append(
      h("div", { class: "chart-grid" }, ...mechPanels),
      h("div", { class: "chart-box" },
        h("h3", {}, "SAUC against p (bands: 95% CI)"), saucChart),
      h("div", { class: "table-box" },
        h("h2", {}, "Estimates"), exportBar, sortableTable(header, rows)),
    );
  }

  // ----------------------------------------------------------------- funnel

  private renderFunnelTab(): void {
    const panel = this.panels.funnel;
    const status = h("div", { class: "status", id: "funnel-status" });
    const out = h("div", { id: "funnel-output" });
    panel.append(
      h("p", { class: "hint" },
        "Funnel of lnDOR against 1/sqrt(effective sample size) with the ",
        "weighted-regression asymmetry test. The test has low power; ",
        "absence of asymmetry is weak evidence of absence of bias."),
      h("div", { class: "controls" },
        h("button", {
          type: "button", class: "primary", id: "run-funnel",
          onclick: () => void this.runFunnel(status, out),
        }, "Draw funnel"),
        status,
      ),
      out,
    );
  }

  async runFunnel(status: HTMLElement, out: HTMLElement): Promise<void> {
    const options = { correction: "zero-studies-only" };
    const key = this.state.datasetId
      ? jobKey(this.state.datasetId, "funnel", options)
      : undefined;
    const run = await this.runJob<FunnelResult>("funnel", options, status, key);
    if (!run) return;
    this.lastFunnel = run;
    const r = run.result;
    clear(out).append(
      h("div", { class: "chart-box" }, funnelChart(r)),
      h("div", { class: "table-box" },
        sortableTable(
          ["statistic", "value"],
          [
            ["pooled lnDOR", show(r.pooled)],
            ["slope", show(r.test.slope)],
            ["slope SE", show(r.test.se_slope)],
            ["t", show(r.test.t_value)],
            ["p-value", show(r.test.p_value)],
          ],
        )),
    );
  }
}
