"""Stateless HTTP service around the estimation pipeline.

Every endpoint is a pure function of its request body and returns the output
files as exact text, so clients (the bundled CLI included) only shuttle bytes
between disk and the service.
"""

from __future__ import annotations

import hashlib

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from rsu_reliability import __version__
from rsu_reliability.pipeline import (
    apply_overrides,
    commission_from_streams,
    estimate_stream,
    evaluate_verdicts,
    run_config_from_dict,
    simulate_stream_text,
)
from rsu_reliability.scenario import ConfigError
from rsu_reliability.serialize import DataError
from rsu_reliability.service.models import (
    CommissionRequest,
    EstimateRequest,
    EvaluateRequest,
    FileBundle,
    HealthResponse,
    SimulateRequest,
)

STREAM_FILE = "stream.ndjson"
REFERENCE_FILE = "reference.json"
METRICS_FILE = "metrics.ndjson"
VERDICT_FILE = "verdict.json"
REPORT_FILE = "separation.json"
BETA_CSV_FILE = "beta_pdfs.csv"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def create_app() -> FastAPI:
    app = FastAPI(title="rsu-reliability", version=__version__)

    @app.exception_handler(ConfigError)
    async def config_error(request: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(status_code=422,
                            content={"kind": "config", "detail": str(exc)})

    @app.exception_handler(DataError)
    async def data_error(request: Request, exc: DataError) -> JSONResponse:
        return JSONResponse(status_code=422,
                            content={"kind": "data", "detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=FileBundle)
    def simulate(req: SimulateRequest) -> FileBundle:
        cfg = run_config_from_dict(apply_overrides(req.config, req.overrides))
        text = simulate_stream_text(cfg)
        return FileBundle(
            files={STREAM_FILE: text},
            summary={
                "ticks": cfg.scenario.n_ticks,
                "seed": cfg.scenario.seed,
                "sha256": _sha256(text),
            },
        )

    @app.post("/commission", response_model=FileBundle)
    def commission(req: CommissionRequest) -> FileBundle:
        text, summary = commission_from_streams(req.streams)
        return FileBundle(files={REFERENCE_FILE: text}, summary=summary)

    @app.post("/estimate", response_model=FileBundle)
    def estimate(req: EstimateRequest) -> FileBundle:
        cfg = run_config_from_dict(apply_overrides(req.config, req.overrides))
        metrics, verdict, summary = estimate_stream(
            cfg, req.stream, req.reference,
            label=req.label, scenario_id=req.scenario_id,
        )
        return FileBundle(
            files={METRICS_FILE: metrics, VERDICT_FILE: verdict},
            summary=summary,
        )

    @app.post("/evaluate", response_model=FileBundle)
    def evaluate(req: EvaluateRequest) -> FileBundle:
        report, csv, summary = evaluate_verdicts(req.verdicts)
        return FileBundle(
            files={REPORT_FILE: report, BETA_CSV_FILE: csv},
            summary=summary,
        )

    return app


app = create_app()
