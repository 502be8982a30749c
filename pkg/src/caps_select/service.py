"""HTTP service exposing selection, simulation and cost endpoints."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .api import handle_cost, handle_select, handle_simulate
from .core import CapsError
from .judge import JudgeUnavailable
from .schemas import CostRequest, CostResponse, SelectRequest, SelectResponse, SimulateRequest, SimulateResponse


def create_app() -> FastAPI:
    app = FastAPI(title="caps-select", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/select", response_model=SelectResponse)
    def select(req: SelectRequest) -> SelectResponse:
        try:
            return handle_select(req)
        except JudgeUnavailable as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        except (CapsError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        try:
            return handle_simulate(req)
        except (CapsError, ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/cost", response_model=CostResponse)
    def cost(req: CostRequest) -> CostResponse:
        try:
            return handle_cost(req)
        except (CapsError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    return app


app = create_app()
