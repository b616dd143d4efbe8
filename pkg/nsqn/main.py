"""
HTTP service: cost table, verification checks and background training runs.
"""
import logging
import os

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from nsqn import run_registry
from nsqn.config import ConfigError, parse_config
from nsqn.cost_model import cost_table, format_cost
from nsqn.verify import all_passed, run_grad_check, run_oracle_check

logging.basicConfig(level=(os.getenv("NSQN_LOG_LEVEL") or "INFO").upper())
logger = logging.getLogger(__name__)

app = FastAPI(title="nsqn", version="0.1.0")


# --- Request/Response models ---


class CheckRequest(BaseModel):
    seed: int = Field(0, ge=0, lt=2**64)


class OracleCheckRequest(CheckRequest):
    trials: int = Field(100, ge=1, le=1000)


class CheckReport(BaseModel):
    passed: bool
    results: list[dict]


class RunRequest(BaseModel):
    config: str = ""  # config file text; empty = all defaults
    overrides: list[str] = []


class RunStarted(BaseModel):
    run_id: str
    optimizer: str
    task: str
    csv_path: str


# --- Routes ---


@app.get("/api/health")
def health():
    return {"ok": True, "version": app.version}


@app.get("/api/cost")
def cost(
    n: int = Query(60000, ge=1),
    b: int = Query(128, ge=1),
    d: int = Query(1000, ge=1),
    m_L: int = Query(10, ge=1),
    m_F: int = Query(100, ge=1),
    L: int = Query(5, ge=1),
    zeta: int = Query(1, ge=0),
):
    """Per-iteration compute and storage of every method; compute is exact (a fraction string when not integral)."""
    table = cost_table(n=n, b=b, d=d, m_L=m_L, m_F=m_F, L=L, zeta=zeta)
    return [
        {
            "algorithm": alg.value,
            "compute": format_cost(c.compute).replace(",", ""),
            "compute_value": float(c.compute),
            "storage": c.storage,
        }
        for alg, c in table.items()
    ]


@app.post("/api/checks/grad", response_model=CheckReport)
def grad_check(req: CheckRequest):
    results = run_grad_check(req.seed)
    return CheckReport(passed=all_passed(results), results=[r.to_dict() for r in results])


@app.post("/api/checks/oracle", response_model=CheckReport)
def oracle_check(req: OracleCheckRequest):
    results = run_oracle_check(req.seed, req.trials)
    return CheckReport(passed=all_passed(results), results=[r.to_dict() for r in results])


@app.post("/api/runs", response_model=RunStarted)
def start_run(req: RunRequest):
    """Validate the config and start training in the background. Poll GET /api/runs/{run_id}."""
    try:
        cfg = parse_config(req.config, req.overrides)
    except ConfigError as e:
        raise HTTPException(status_code=400, detail=str(e))
    try:
        run_id = run_registry.start_run(cfg)
    except run_registry.RunPathConflict as e:
        raise HTTPException(status_code=409, detail=str(e))
    csv_path = run_registry.get_run(run_id)["csv_path"]
    return RunStarted(run_id=run_id, optimizer=cfg.optimizer, task=cfg.task, csv_path=csv_path)


@app.get("/api/runs")
def list_runs():
    return run_registry.get_runs()


@app.get("/api/runs/{run_id}")
def get_run(run_id: str):
    rec = run_registry.get_run(run_id)
    if not rec:
        raise HTTPException(status_code=404, detail="Run not found")
    return rec


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8080)
