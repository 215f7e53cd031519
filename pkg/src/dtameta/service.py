"""HTTP facade: datasets, analyses, and job management.

Endpoints
    POST   /datasets                     upload CSV text or JSON rows
    GET    /datasets/{id}
    POST   /datasets/{id}/analyses       enqueue an analysis job
    GET    /jobs/{id}                    poll state/progress/result
    DELETE /jobs/{id}                    cancel (honored at cell boundaries)
    GET    /jobs/{id}/export?format=     json or csv download

Environment: PORT, DATA_DIR (optional persistence), MAX_UPLOAD_BYTES.
Jobs run on a small thread pool; computation modules are pure, so the
only shared state is the registry guarded by one lock per structure.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .data import StudyTable, continuity_correct, logit_transform, parse_dataset
from .descriptives import forest_series, scatter_data, study_metrics
from .errors import AnalysisError
from .funnel import asymmetry_test
from .glmm import QuadratureConfig, fit_glmm
from .reitsma import fit_reitsma
from .selection import DEFAULT_P_GRID, SelectionMechanism, sensitivity_grid
from .sroc import sauc, sop, sroc_curve

JOB_KINDS = ("descriptives", "reitsma", "glmm", "sa_grid", "funnel")

_MECHANISM_NAMES = {"estimated", "lnDOR", "sensitivity", "specificity"}


@dataclass
class Job:
    id: str
    kind: str
    dataset_id: str
    options: dict
    state: str = "queued"  # queued -> running -> done | failed | cancelled
    progress: str | None = None
    result: dict | None = None
    error: str | None = None
    csv: str | None = None
    cancel_event: threading.Event = field(default_factory=threading.Event)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def snapshot(self) -> dict:
        with self.lock:
            out = {
                "id": self.id,
                "kind": self.kind,
                "dataset_id": self.dataset_id,
                "state": self.state,
                "progress": self.progress,
            }
            if self.state == "done":
                out["result"] = self.result
            if self.error is not None:
                out["error"] = self.error
            return out


class Registry:
    """Datasets by content hash, jobs by opaque token; optional file backing."""

    def __init__(self, data_dir: str | None):
        self.datasets: dict[str, StudyTable] = {}
        self.warnings: dict[str, list[str]] = {}
        self.jobs: dict[str, Job] = {}
        self.lock = threading.Lock()
        self.data_dir = data_dir
        if data_dir:
            os.makedirs(os.path.join(data_dir, "datasets"), exist_ok=True)
            os.makedirs(os.path.join(data_dir, "jobs"), exist_ok=True)
            self._reload()

    def _reload(self):
        ddir = os.path.join(self.data_dir, "datasets")
        for name in os.listdir(ddir):
            if name.endswith(".json"):
                payload = json.loads(open(os.path.join(ddir, name)).read())
                table = StudyTable.from_json(payload["table"])
                self.datasets[payload["id"]] = table
                self.warnings[payload["id"]] = payload.get("warnings", [])

    def add_dataset(self, table: StudyTable, warnings: list[str]) -> str:
        digest = hashlib.sha256(
            json.dumps(table.to_json(), sort_keys=True).encode()
        ).hexdigest()[:16]
        with self.lock:
            self.datasets[digest] = table
            self.warnings[digest] = warnings
        if self.data_dir:
            path = os.path.join(self.data_dir, "datasets", f"{digest}.json")
            with open(path, "w") as fh:
                json.dump({"id": digest, "table": table.to_json(),
                           "warnings": warnings}, fh)
        return digest

    def persist_job(self, job: Job):
        if not self.data_dir:
            return
        path = os.path.join(self.data_dir, "jobs", f"{job.id}.json")
        with open(path, "w") as fh:
            json.dump(job.snapshot(), fh)


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "detail": message})


def _validate_options(kind: str, options: dict) -> dict | str:
    """Normalized options, or an error message string."""
    out = dict(options)
    if kind in ("descriptives", "funnel", "reitsma", "sa_grid"):
        strategy = out.setdefault("correction", "zero-studies-only")
        if strategy not in ("zero-studies-only", "all-studies", "none"):
            return f"unknown correction {strategy!r}"
    if kind == "reitsma":
        method = out.setdefault("method", "ml")
        if method not in ("ml", "reml"):
            return f"unknown method {method!r}"
    if kind == "glmm":
        nodes = out.setdefault("nodes_per_dim", 7)
        if not isinstance(nodes, int) or nodes < 3 or nodes % 2 == 0:
            return "nodes_per_dim must be an odd integer >= 3"
    if kind in ("reitsma", "glmm", "sa_grid"):
        curve = out.setdefault("curve", "sroc")
        if curve not in ("sroc", "hsroc"):
            return f"unknown curve kind {curve!r}"
    if kind == "descriptives":
        alpha = out.setdefault("alpha", 0.05)
        if not isinstance(alpha, (int, float)) or not 0.0 < alpha < 1.0:
            return "alpha must lie in (0, 1)"
    if kind == "sa_grid":
        p_values = out.setdefault("p_values", list(DEFAULT_P_GRID))
        if (
            not isinstance(p_values, list)
            or not p_values
            or any(not isinstance(v, (int, float)) for v in p_values)
        ):
            return "p_values must be a numeric list"
        if any(not 0.0 < v <= 1.0 for v in p_values):
            return "every p must lie in (0, 1]"
        if abs(p_values[0] - 1.0) > 1e-12 or any(
            b >= a for a, b in zip(p_values, p_values[1:])
        ):
            return "p_values must descend from 1"
        form = out.setdefault("form", "probit")
        if form not in ("probit", "step"):
            return f"unknown selection form {form!r}"
        mechs = out.setdefault(
            "mechanisms", ["estimated", "lnDOR", "sensitivity", "specificity"]
        )
        for m in mechs:
            if isinstance(m, str):
                if m not in _MECHANISM_NAMES:
                    return f"unknown mechanism {m!r}"
            elif isinstance(m, dict):
                if "c1" not in m or "c2" not in m:
                    return "custom mechanism needs c1 and c2"
            else:
                return "mechanisms must be names or {c1, c2} objects"
    return out


def _grid_mechanisms(options: dict) -> list[SelectionMechanism]:
    form = options["form"]
    cutoff = float(options.get("cutoff_u", 1.645))
    out = []
    for m in options["mechanisms"]:
        if isinstance(m, str):
            out.append(SelectionMechanism.preset(m, form=form, cutoff_u=cutoff))
        else:
            out.append(
                SelectionMechanism.custom(
                    float(m["c1"]), float(m["c2"]), form=form, cutoff_u=cutoff
                )
            )
    return out


def _fit_payload(fit, curve_kind: str, grid_n: int = 201) -> dict:
    return {
        "fit": fit.to_json(),
        "sroc": sroc_curve(fit, kind=curve_kind, grid_n=grid_n).to_json(),
        "sauc": sauc(fit, kind=curve_kind).to_json(),
        "sop": sop(fit).to_json(),
    }


def _run_job(job: Job, table: StudyTable) -> tuple[dict, str | None]:
    """Returns (result payload, csv export or None)."""
    options = job.options
    kind = job.kind
    if kind == "descriptives":
        corrected = continuity_correct(table, options["correction"])
        sample = logit_transform(corrected)
        metrics = study_metrics(sample, corrected, alpha=options["alpha"])
        payload = {
            "m": len(table),
            "original": table.to_json(),
            "corrected_flags": list(corrected.corrected_flags),
            "transformed": sample.to_json(),
            "metrics": [x.to_json() for x in metrics],
            "forest": {
                which: forest_series(metrics, which)
                for which in ("se", "sp", "lnDOR", "lr_pos", "lr_neg")
            },
            "scatter_interval": [
                d.to_json() for d in scatter_data(sample, "interval", options["alpha"])
            ],
            "scatter_region": [
                d.to_json() for d in scatter_data(sample, "region", options["alpha"])
            ],
        }
        csv_text = _metrics_csv(payload["metrics"])
        return payload, csv_text
    if kind == "reitsma":
        from .data import prepare_sample

        sample = prepare_sample(table, options["correction"])
        fit = fit_reitsma(sample, method=options["method"])
        payload = _fit_payload(fit, options["curve"])
        return payload, _fit_csv(payload)
    if kind == "glmm":
        fit = fit_glmm(table, QuadratureConfig(nodes_per_dim=options["nodes_per_dim"]))
        payload = _fit_payload(fit, options["curve"])
        return payload, _fit_csv(payload)
    if kind == "funnel":
        from .data import prepare_sample

        sample = prepare_sample(table, options["correction"])
        result = asymmetry_test(sample, table)
        payload = result.to_json()
        lines = ["id,lnDOR,inv_sqrt_ess"] + [
            f"{p['id']},{p['lnDOR']!r},{p['inv_sqrt_ess']!r}"
            for p in payload["points"]
        ]
        return payload, "\n".join(lines) + "\n"
    if kind == "sa_grid":
        from .data import prepare_sample

        sample = prepare_sample(table, options["correction"])
        total_cells = len(options["mechanisms"]) * len(options["p_values"])

        def progress(done, total):
            with job.lock:
                job.progress = f"{done}/{total}"

        grid = sensitivity_grid(
            sample,
            mechanisms=_grid_mechanisms(options),
            p_values=tuple(options["p_values"]),
            curve_kind=options["curve"],
            progress=progress,
            should_stop=job.cancel_event.is_set,
        )
        with job.lock:
            job.progress = f"{len(grid.cells)}/{total_cells}"
        return grid.to_json(), grid.to_csv()
    raise AnalysisError(f"unknown job kind {kind!r}")


def _metrics_csv(metrics: list[dict]) -> str:
    header = "id," + ",".join(
        f"{m}_{part}" for m in ("se", "sp", "lnDOR", "lr_pos", "lr_neg")
        for part in ("est", "lo", "hi")
    )
    lines = [header]
    for row in metrics:
        cells = [row["id"]]
        for m in ("se", "sp", "lnDOR", "lr_pos", "lr_neg"):
            for part in ("est", "lo", "hi"):
                cells.append(repr(row[m][part]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _fit_csv(payload: dict) -> str:
    fit = payload["fit"]
    rows = [
        ("mu1", fit["mu"][0]), ("mu2", fit["mu"][1]),
        ("tau1", fit["tau"][0]), ("tau2", fit["tau"][1]), ("rho", fit["rho"]),
        ("loglik", fit["loglik"]),
        ("sauc", payload["sauc"]["value"]),
        ("sauc_lo", payload["sauc"]["lo"]), ("sauc_hi", payload["sauc"]["hi"]),
        ("se", payload["sop"]["se"]), ("sp", payload["sop"]["sp"]),
    ]
    return "parameter,value\n" + "\n".join(f"{k},{v!r}" for k, v in rows) + "\n"


def create_app(
    data_dir: str | None = None,
    max_upload_bytes: int | None = None,
    workers: int = 2,
) -> FastAPI:
    data_dir = data_dir if data_dir is not None else os.environ.get("DATA_DIR") or None
    if max_upload_bytes is None:
        max_upload_bytes = int(os.environ.get("MAX_UPLOAD_BYTES", 2 * 1024 * 1024))

    app = FastAPI(title="dtameta", version="0.1.0")
    # open CORS: the service is a local, unauthenticated analysis tool and
    # the UI may be hosted elsewhere
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    registry = Registry(data_dir)
    pool = ThreadPoolExecutor(max_workers=workers)
    app.state.registry = registry

    @app.post("/datasets")
    async def create_dataset(request: Request):
        body = await request.body()
        if len(body) > max_upload_bytes:
            return _error_response(413, "E_TOOBIG",
                                   f"payload exceeds {max_upload_bytes} bytes")
        content_type = request.headers.get("content-type", "")
        try:
            if "json" in content_type:
                payload = json.loads(body)
                table = StudyTable.from_json(payload)
                warnings: list[str] = []
            else:
                table, warnings = parse_dataset(body)
        except AnalysisError as exc:
            return _error_response(400, exc.code, str(exc))
        except json.JSONDecodeError as exc:
            return _error_response(400, "E_VALUE", f"invalid JSON: {exc}")
        dataset_id = registry.add_dataset(table, warnings)
        return JSONResponse(
            status_code=201,
            content={"id": dataset_id, "m": len(table), "warnings": warnings},
        )

    @app.get("/datasets/{dataset_id}")
    def get_dataset(dataset_id: str):
        table = registry.datasets.get(dataset_id)
        if table is None:
            return _error_response(404, "E_NOTFOUND", "unknown dataset")
        return {
            "id": dataset_id,
            "m": len(table),
            "warnings": registry.warnings.get(dataset_id, []),
            "table": table.to_json(),
        }

    @app.post("/datasets/{dataset_id}/analyses", status_code=202)
    def run_analysis(dataset_id: str, spec: dict):
        table = registry.datasets.get(dataset_id)
        if table is None:
            return _error_response(404, "E_NOTFOUND", "unknown dataset")
        kind = spec.get("kind")
        if kind not in JOB_KINDS:
            return _error_response(422, "E_VALUE", f"unknown analysis kind {kind!r}")
        options = _validate_options(kind, spec.get("options", {}))
        if isinstance(options, str):
            return _error_response(422, "E_VALUE", options)
        job = Job(id=uuid.uuid4().hex, kind=kind, dataset_id=dataset_id,
                  options=options)
        with registry.lock:
            registry.jobs[job.id] = job

        def execute():
            with job.lock:
                if job.state == "cancelled":
                    return
                job.state = "running"
            try:
                result, csv_text = _run_job(job, table)
                with job.lock:
                    if job.cancel_event.is_set():
                        job.state = "cancelled"
                    else:
                        job.state = "done"
                        job.result = result
                        job.csv = csv_text
            except AnalysisError as exc:
                with job.lock:
                    job.state = "failed"
                    job.error = f"{exc.code}: {exc}"
            except Exception as exc:  # keep the worker alive
                with job.lock:
                    job.state = "failed"
                    job.error = f"E_INTERNAL: {exc}"
            registry.persist_job(job)

        pool.submit(execute)
        return {"job_id": job.id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = registry.jobs.get(job_id)
        if job is None:
            return _error_response(404, "E_NOTFOUND", "unknown job")
        return job.snapshot()

    @app.delete("/jobs/{job_id}")
    def cancel_job(job_id: str):
        job = registry.jobs.get(job_id)
        if job is None:
            return _error_response(404, "E_NOTFOUND", "unknown job")
        job.cancel_event.set()
        with job.lock:
            if job.state == "queued":
                job.state = "cancelled"
            return {"id": job.id, "state": job.state}

    @app.get("/jobs/{job_id}/export")
    def export_job(job_id: str, format: str = "json"):
        job = registry.jobs.get(job_id)
        if job is None:
            return _error_response(404, "E_NOTFOUND", "unknown job")
        with job.lock:
            if job.state != "done":
                return _error_response(409, "E_NOTDONE",
                                       f"job is {job.state}, not done")
            if format == "json":
                return JSONResponse(content=job.result)
            if format == "csv":
                return Response(content=job.csv or "", media_type="text/csv")
        return _error_response(422, "E_VALUE", f"unknown export format {format!r}")

    ui_dir = os.environ.get("DTAMETA_UI_DIR")
    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


app = create_app()


def main() -> None:
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=int(os.environ.get("PORT", 8000)))


if __name__ == "__main__":
    main()
