"""
Training runs: wire task, model and optimizer from an ExperimentConfig, train,
and stream metric rows to CSV. Also the batch mode that runs several
(optimizer, seed) combinations on a thread pool and reports medians.
"""
import csv
import logging
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Callable

from nsqn.config import ConfigValidationError, ExperimentConfig, dump_config
from nsqn.datasets import (
    MNIST_CLASSES,
    gen_counting,
    load_mnist_idx,
    minibatches,
    pixel_sequencer,
    resolve_mnist_paths,
    row_sequencer,
)
from nsqn.drivers import build_driver
from nsqn.numkit import NumericError, SeededRng
from nsqn.rnn_model import BatchOracle, RnnSpec, SequenceBatch, evaluate, init_params

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "NSQN_DATA_DIR"


class TerminationReason(str, Enum):
    EPOCHS_DONE = "epochs_done"
    K_MAX = "k_max"
    NUMERIC_ERROR = "numeric_error"


@dataclass(frozen=True)
class MetricsRow:
    epoch: int
    step: int
    loss: float
    metric: float
    mu: float
    n_pairs: int
    n_fim: int
    resets: int
    grad_evals: int
    wall_ms: int

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_csv(self) -> list[str]:
        return [format(v, ".12g") if isinstance(v, float) else str(v) for v in astuple(self)]

    def to_dict(self) -> dict:
        return dict(zip(self.header(), astuple(self)))


@dataclass
class RunSummary:
    final_loss: float
    final_metric: float
    wall_ms: int
    reason: TerminationReason
    steps: int
    csv_path: str
    error: str | None = None


@dataclass(frozen=True)
class TaskData:
    spec: RnnSpec
    train: SequenceBatch


def _mnist_paths(cfg: ExperimentConfig) -> tuple[Path, Path]:
    opts = cfg.task_opts
    if opts.images and opts.labels:
        return Path(opts.images), Path(opts.labels)
    data_dir = os.getenv(DATA_DIR_ENV)
    if not data_dir:
        raise FileNotFoundError(f"set task.images/task.labels or {DATA_DIR_ENV} for the {cfg.task} task")
    images, labels = resolve_mnist_paths(data_dir)
    return Path(opts.images) if opts.images else images, Path(opts.labels) if opts.labels else labels


def build_task(cfg: ExperimentConfig, rng: SeededRng) -> TaskData:
    """Training set and network shape for the configured task. rng is only used by generated tasks."""
    opts = cfg.task_opts
    if cfg.task == "counting":
        data = gen_counting(opts.n_samples, opts.T, rng)
        spec = RnnSpec(n_in=1, n_hidden=opts.n_hidden, n_out=data.n_classes, T=data.T)
        return TaskData(spec, data.as_batch())

    mnist = load_mnist_idx(*_mnist_paths(cfg)).head(opts.n_samples)
    if cfg.train.b > mnist.size:
        raise ConfigValidationError(f"invalid config: train.b ({cfg.train.b}) exceeds the {mnist.size} images loaded")
    if cfg.task == "mnist-row":
        batch = row_sequencer(mnist)
    else:
        batch = pixel_sequencer(mnist, opts.downsample)
    _, T, n_in = batch.inputs.shape
    return TaskData(RnnSpec(n_in=n_in, n_hidden=opts.n_hidden, n_out=MNIST_CLASSES, T=T), batch)


class MetricsWriter:
    """CSV sink that flushes after every row, so an interrupted run leaves only whole rows."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="", encoding="utf-8")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(MetricsRow.header())
        self._fh.flush()

    def write(self, row: MetricsRow) -> None:
        self._csv.writerow(row.to_csv())
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _elapsed_ms(start: float) -> int:
    return int((time.monotonic() - start) * 1000)


def run_experiment(
    cfg: ExperimentConfig, on_row: Callable[[MetricsRow], None] | None = None
) -> RunSummary:
    """
    Train per cfg, writing one row per epoch (plus one every train.log_every
    steps when set) to cfg.output_path() and the effective config next to it.
    Epoch rows evaluate on the full training set, step rows on the current batch.
    """
    start = time.monotonic()
    seed = cfg.train.seed
    master = SeededRng(seed)
    task = build_task(cfg, master.spawn("data"))
    spec, train = task.spec, task.train
    w0 = init_params(spec, master.spawn("init"))
    driver = build_driver(cfg, w0)
    if driver.full_batch and spec.n_params > cfg.dense.max_params:
        raise ConfigValidationError(
            f"{cfg.optimizer} stores a {spec.n_params}^2 matrix; dense.max_params is {cfg.dense.max_params}"
        )

    out = cfg.output_path()
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(f"{out}.config").write_text(dump_config(cfg), encoding="utf-8")
    logger.info(
        "run start: task=%s optimizer=%s seed=%d params=%d samples=%d -> %s",
        cfg.task, cfg.optimizer, seed, spec.n_params, train.size, out,
    )

    evals = 0
    last: MetricsRow | None = None
    reason = TerminationReason.EPOCHS_DONE
    error = None
    k_max = cfg.hp.k_max
    full_oracle = BatchOracle(spec, train) if driver.full_batch else None

    def emit(epoch: int, data: SequenceBatch) -> MetricsRow:
        loss, metric = evaluate(driver.w, spec, data, cfg.metric)
        status = driver.status()
        row = MetricsRow(
            epoch=epoch,
            step=driver.k,
            loss=loss,
            metric=metric,
            mu=status.mu,
            n_pairs=status.n_pairs,
            n_fim=status.n_fim,
            resets=status.resets,
            grad_evals=evals,
            wall_ms=_elapsed_ms(start),
        )
        writer.write(row)
        if on_row is not None:
            on_row(row)
        return row

    with MetricsWriter(out) as writer:
        try:
            log_every = cfg.train.log_every
            for epoch in range(1, cfg.train.epochs + 1):
                if k_max is not None and driver.k >= k_max:
                    reason = TerminationReason.K_MAX
                    break
                if full_oracle is not None:
                    batches = [None] * cfg.dense.steps_per_epoch
                else:
                    batches = list(minibatches(train.size, cfg.train.b, seed, epoch))
                for i, idx in enumerate(batches):
                    if k_max is not None and driver.k >= k_max:
                        reason = TerminationReason.K_MAX
                        break
                    oracle = full_oracle if full_oracle is not None else BatchOracle(spec, train.take(idx))
                    before = oracle.evaluations
                    driver.step(oracle)
                    evals += oracle.evaluations - before
                    stopping = i == len(batches) - 1 or (k_max is not None and driver.k >= k_max)
                    # the epoch row that follows covers this step
                    if log_every and driver.k % log_every == 0 and not stopping:
                        last = emit(epoch, oracle.batch)
                last = emit(epoch, train)
                logger.info("epoch %d: step=%d loss=%.6g %s=%.6g", epoch, last.step, last.loss, cfg.metric, last.metric)
        except NumericError as e:
            reason = TerminationReason.NUMERIC_ERROR
            error = str(e)
            logger.warning("run stopped on numeric error: %s", e)

    summary = RunSummary(
        final_loss=last.loss if last else float("nan"),
        final_metric=last.metric if last else float("nan"),
        wall_ms=_elapsed_ms(start),
        reason=reason,
        steps=driver.k,
        csv_path=out,
        error=error,
    )
    logger.info("run end: %s after %d steps, loss=%.6g", reason.value, driver.k, summary.final_loss)
    return summary


@dataclass
class CompareResult:
    optimizer: str
    median_loss: float
    median_metric: float
    runs: list[RunSummary]


def compare(
    cfg: ExperimentConfig,
    optimizers: list[str],
    seeds: list[int],
    out_dir: str | Path = "runs",
    max_workers: int | None = None,
) -> list[CompareResult]:
    """Run every (optimizer, seed) pair on its own thread and own CSV; medians per optimizer."""
    out_dir = Path(out_dir)
    jobs = []
    for opt in optimizers:
        for seed in seeds:
            update = {
                "optimizer": opt,
                "train": cfg.train.model_copy(update={"seed": seed}),
                "out": str(out_dir / f"{cfg.task}_{opt}_s{seed}.csv"),
            }
            # revalidate so an unknown optimizer name fails here, not in a worker
            jobs.append((opt, ExperimentConfig.model_validate({**dict(cfg), **update})))

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [(opt, pool.submit(run_experiment, job)) for opt, job in jobs]
        by_opt: dict[str, list[RunSummary]] = {opt: [] for opt in optimizers}
        for opt, fut in futures:
            by_opt[opt].append(fut.result())

    results = []
    for opt, runs in by_opt.items():
        results.append(CompareResult(
            optimizer=opt,
            median_loss=statistics.median(r.final_loss for r in runs),
            median_metric=statistics.median(r.final_metric for r in runs),
            runs=runs,
        ))
        logger.info("compare %s: median loss=%.6g metric=%.6g over %d seeds", opt, results[-1].median_loss, results[-1].median_metric, len(runs))
    return results



def best_optimizer(results: list[CompareResult], metric: str) -> str | None:
    """Optimizer with the strictly best median metric (lowest mse, highest accuracy); None on a tie."""
    sign = -1.0 if metric == "accuracy" else 1.0
    ranked = sorted(results, key=lambda r: sign * r.median_metric)
    if not ranked or (len(ranked) > 1 and ranked[0].median_metric == ranked[1].median_metric):
        return None
    return ranked[0].optimizer
