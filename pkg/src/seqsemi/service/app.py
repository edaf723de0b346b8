"""HTTP facade over the pure check runner.

All endpoints are stateless wrappers: the service owns no configuration and
performs no I/O beyond the request/response cycle, so the CLI can run it
in-process or talk to a deployed instance interchangeably.
"""

from __future__ import annotations

from fastapi import FastAPI
from pydantic import ValidationError

from .. import __version__
from ..checks import build_context, list_checks, run_checks
from ..config import ExperimentConfig
from ..reportio import paths_table, plain
from .models import (
    ChecksResponse,
    RunRequest,
    RunResponse,
    SimulateRequest,
    SimulateResponse,
    ValidateRequest,
    ValidateResponse,
    VersionResponse,
)

__all__ = ["app", "create_app"]


def create_app() -> FastAPI:
    app = FastAPI(title="seqsemi", version=__version__)

    @app.get("/version", response_model=VersionResponse)
    def version() -> VersionResponse:
        return VersionResponse(version=__version__)

    @app.get("/checks", response_model=ChecksResponse)
    def checks() -> ChecksResponse:
        return ChecksResponse(checks=list_checks())

    @app.post("/run", response_model=RunResponse)
    def run(request: RunRequest) -> RunResponse:
        result = run_checks(request.config)
        return RunResponse(
            version=result["version"],
            all_pass=result["all_pass"],
            config=result["config"],
            reports=plain(result["reports"]),
        )

    @app.post("/validate", response_model=ValidateResponse)
    def validate(request: ValidateRequest) -> ValidateResponse:
        try:
            ExperimentConfig.model_validate(request.config)
        except ValidationError as exc:
            errors = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()]
            return ValidateResponse(valid=False, errors=errors)
        return ValidateResponse(valid=True, errors=[])

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(request: SimulateRequest) -> SimulateResponse:
        ctx = build_context(request.config)
        return SimulateResponse(version=__version__, rows=paths_table(ctx.X))

    return app


app = create_app()
