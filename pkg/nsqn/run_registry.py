"""
In-memory store for training runs started over HTTP: status, metric rows and summary.
Each run trains on its own background thread; exposed via GET /api/runs.
"""
import logging
import math
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from nsqn.config import ExperimentConfig
from nsqn.experiment import MetricsRow, RunSummary, run_experiment

logger = logging.getLogger(__name__)


class RunPathConflict(ValueError):
    """Raised when a requested CSV path is still being written by a running run."""
    pass


@dataclass
class RunRecord:
    run_id: str
    task: str
    optimizer: str
    seed: int
    csv_path: str
    status: str = "running"  # "running" | "finished" | "failed"
    start_time: Optional[float] = None  # from time.time()
    end_time: Optional[float] = None
    rows: list[MetricsRow] = field(default_factory=list)
    summary: Optional[RunSummary] = None
    error: Optional[str] = None


_lock = threading.Lock()
_runs: dict[str, RunRecord] = {}
_threads: dict[str, threading.Thread] = {}


def _add_row(run_id: str, row: MetricsRow) -> None:
    with _lock:
        rec = _runs.get(run_id)
        if rec:
            rec.rows.append(row)


def _finish(run_id: str, summary: Optional[RunSummary], error: Optional[str]) -> None:
    with _lock:
        rec = _runs.get(run_id)
        if not rec:
            return
        rec.end_time = time.time()
        rec.summary = summary
        rec.error = error or (summary.error if summary else None)
        rec.status = "failed" if error else "finished"


def _worker(run_id: str, cfg: ExperimentConfig) -> None:
    try:
        summary = run_experiment(cfg, on_row=lambda row: _add_row(run_id, row))
    except Exception as e:
        logger.exception("[run_registry] run %s failed", run_id)
        _finish(run_id, None, f"{type(e).__name__}: {e}")
        return
    _finish(run_id, summary, None)
    logger.info("[run_registry] finished run_id=%s reason=%s", run_id, summary.reason.value)


def start_run(cfg: ExperimentConfig) -> str:
    """
    Register a run and start training it on a daemon thread. Returns the run id.
    Without an explicit `out`, the CSV path includes the run id so concurrent
    runs of the same task, optimizer and seed never share a file.
    """
    run_id = uuid.uuid4().hex[:12]
    if cfg.out is None:
        cfg = cfg.model_copy(update={"out": f"runs/{cfg.task}_{cfg.optimizer}_s{cfg.train.seed}_{run_id}.csv"})
    csv_path = cfg.output_path()
    with _lock:
        target = Path(csv_path).resolve()
        busy = [r.run_id for r in _runs.values() if r.status == "running" and Path(r.csv_path).resolve() == target]
        if busy:
            raise RunPathConflict(f"{csv_path} is in use by run {busy[0]}")
        _runs[run_id] = RunRecord(
            run_id=run_id,
            task=cfg.task,
            optimizer=cfg.optimizer,
            seed=cfg.train.seed,
            csv_path=csv_path,
            start_time=time.time(),
        )
        thread = threading.Thread(target=_worker, args=(run_id, cfg), name=f"run-{run_id}", daemon=True)
        _threads[run_id] = thread
    thread.start()
    logger.info("[run_registry] started run_id=%s task=%s optimizer=%s", run_id, cfg.task, cfg.optimizer)
    return run_id


def wait_for(run_id: str, timeout: Optional[float] = None) -> bool:
    """Block until the run's thread ends; False on timeout or unknown id."""
    with _lock:
        thread = _threads.get(run_id)
    if thread is None:
        return False
    thread.join(timeout)
    return not thread.is_alive()


def _json_safe(value):
    # JSON has no NaN; runs that fail before their first row report none
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def get_runs() -> list[dict]:
    """Return list of run summaries (newest first)."""
    with _lock:
        records = list(_runs.values())
        return [
            {
                "run_id": r.run_id,
                "task": r.task,
                "optimizer": r.optimizer,
                "seed": r.seed,
                "status": r.status,
                "start_time": r.start_time,
                "end_time": r.end_time,
                "row_count": len(r.rows),
            }
            for r in sorted(records, key=lambda x: (x.start_time or 0), reverse=True)
        ]


def get_run(run_id: str) -> Optional[dict]:
    """Return full run record with every metric row logged so far."""
    with _lock:
        rec = _runs.get(run_id)
        if not rec:
            return None
        summary = None
        if rec.summary:
            summary = {k: _json_safe(v) for k, v in asdict(rec.summary).items()}
            summary["reason"] = rec.summary.reason.value
        return {
            "run_id": rec.run_id,
            "task": rec.task,
            "optimizer": rec.optimizer,
            "seed": rec.seed,
            "status": rec.status,
            "csv_path": rec.csv_path,
            "start_time": rec.start_time,
            "end_time": rec.end_time,
            "error": rec.error,
            "summary": summary,
            "rows": [row.to_dict() for row in rec.rows],
        }
