"""HTTP front end.  Responses carry the same bytes the CLI writes to disk."""

from fastapi import FastAPI, HTTPException
from fastapi.responses import Response

from .. import __version__, handlers
from ..core import DataError, DegenerateError
from ..report import dumps
from ..simgen import ScenarioError
from .schemas import (ClassifyRequest, Health, SimulateReportModel, SimulateRequest, TestReportModel,
                      TwoSampleRequest, VerifyReportModel, VerifyRequest)

app = FastAPI(title="localdiff", version=__version__)

DATA_ERRORS = (DataError, DegenerateError, ScenarioError, ValueError)


def _respond(fn, *args, **kwargs) -> Response:
    try:
        body = fn(*args, **kwargs)
    except DATA_ERRORS as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return Response(content=dumps(body), media_type="application/json")


@app.get("/health", response_model=Health)
def health():
    return Health(status="ok", version=__version__)


@app.post("/v1/test", response_model=TestReportModel)
def test(req: TwoSampleRequest):
    def run():
        return handlers.handle_test(handlers.two_sample(req.first, req.second), req.options.model_dump())
    return _respond(run)


@app.post("/v1/test1d", response_model=TestReportModel)
def test1d(req: TwoSampleRequest):
    def run():
        return handlers.handle_test1d(handlers.two_sample(req.first, req.second), req.options.model_dump())
    return _respond(run)


@app.post("/v1/classify", response_model=TestReportModel)
def classify(req: ClassifyRequest):
    return _respond(handlers.handle_classify, req.points, req.y, req.lam, req.options.model_dump())


@app.post("/v1/verify", response_model=VerifyReportModel)
def verify(req: VerifyRequest):
    return _respond(handlers.handle_verify, req.suite, req.seed, req.count, req.nmax, req.details)


@app.post("/v1/simulate", response_model=SimulateReportModel)
def simulate(req: SimulateRequest):
    return _respond(handlers.handle_simulate, req.scenario, req.options.model_dump(), req.reps)
