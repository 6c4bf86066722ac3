"""
Experiment Module

Runs the digit x n_size x replication matrix: every cell samples a split
quadruple, trains the four regimes, evaluates the four test scores and records
the training and test curves over the grid. Cells run on a bounded executor
driven from an asyncio loop; results are written in cell order by a single
writer, so the output bytes depend only on the configuration.

Outputs (CSV, header row, '.' decimals):
    scores.csv         one row per cell
    curves.csv         one row per cell, regime, phase and grid point
    summary.csv        per (digit, n_size, score): mean, std, median, p25, p75, count
    consonance.csv     per (n_size, criterion): digits where consonant training wins
    tables.csv         per (n_size, digit): the four scores as "mean ± std"
    curve_summary.csv  per (digit, n_size, regime, phase, rho): curve median and quartiles
"""
import asyncio
import functools
import math
import os
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from pyconformaltrain.async_logging import drain_handlers, getLogger
from pyconformaltrain.criteria import Criterion
from pyconformaltrain.data import DIGITS, MnistPool, TaskSpec, load_idx, sample_task
from pyconformaltrain.exceptions import ConfigError
from pyconformaltrain.training import (
    OF_VARIANTS,
    ParamGrid,
    Regime,
    Score,
    ScoreReport,
    TrainedModel,
    evaluate,
    score_curve,
    train,
)

POOL_SPLITS = ("train", "test", "both")
CELL_COLUMNS = ["digit", "n_size", "replication"]
CURVE_COLUMNS = CELL_COLUMNS + ["regime", "rho", "log_rho", "phase", "value"]
SUMMARY_COLUMNS = ["digit", "n_size", "score", "mean", "std", "median", "p25", "p75", "count"]
CURVE_SUMMARY_COLUMNS = [
    "digit", "n_size", "regime", "phase", "rho", "log_rho",
    "median", "p25", "p75", "mean", "count",
]
OUTPUT_FILES = {
    "scores": "scores.csv",
    "curves": "curves.csv",
    "summary": "summary.csv",
    "consonance": "consonance.csv",
    "tables": "tables.csv",
    "curve_summary": "curve_summary.csv",
}

# consonant score first, dissonant second
CONSONANCE_PAIRS = {
    Criterion.PE: (Score.PE_TEST_PE_TRAIN, Score.PE_TEST_OF_TRAIN),
    Criterion.OF: (Score.OF_TEST_OF_TRAIN, Score.OF_TEST_PE_TRAIN),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Settings of one experiment matrix.

    Raises:
        ConfigError: On any invalid field.
    """

    mnist_images: Path | None = None
    mnist_labels: Path | None = None
    out: Path = Path("results")
    digits: tuple[int, ...] = DIGITS
    n_sizes: tuple[int, ...] = (5, 10, 20, 40)
    replications: int = 10
    seed: int = 0
    grid: ParamGrid = field(default_factory=ParamGrid)
    mnist_test_images: Path | None = None
    mnist_test_labels: Path | None = None
    pool_splits: str = "train"
    workers: int = 1
    of_variant: str = "loo"

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(self.digits))
        object.__setattr__(self, "n_sizes", tuple(self.n_sizes))
        if not self.digits or any(d not in DIGITS for d in self.digits):
            raise ConfigError(f"digits must be a nonempty subset of 0..9, got {self.digits}")
        if len(set(self.digits)) != len(self.digits):
            raise ConfigError("digits must not repeat")
        if not self.n_sizes or any(n < 2 for n in self.n_sizes):
            raise ConfigError(f"every n_size must be at least 2, got {self.n_sizes}")
        if len(set(self.n_sizes)) != len(self.n_sizes):
            raise ConfigError("n_sizes must not repeat")
        if self.replications < 1:
            raise ConfigError(f"replications must be at least 1, got {self.replications}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.pool_splits not in POOL_SPLITS:
            raise ConfigError(f"pool_splits must be one of {', '.join(POOL_SPLITS)}")
        if self.of_variant not in OF_VARIANTS:
            raise ConfigError(f"of_variant must be one of {', '.join(OF_VARIANTS)}")

    def cells(self) -> list[TaskSpec]:
        """Every cell in (digit, n_size, replication) order."""
        return [
            TaskSpec(digit, n_size, self.seed, replication)
            for digit in self.digits
            for n_size in self.n_sizes
            for replication in range(self.replications)
        ]


@dataclass(frozen=True)
class CellResult:
    """Trained models, test curves and test scores of one cell."""

    spec: TaskSpec
    models: dict[Regime, TrainedModel]
    test_curves: dict[Regime, tuple[tuple[float, float], ...]]
    report: ScoreReport


@dataclass(frozen=True)
class ExperimentOutcome:
    """Written files and the cells that failed."""

    paths: dict[str, Path]
    results: tuple[CellResult, ...]
    failed: tuple[TaskSpec, ...]

    @property
    def ok(self) -> bool:
        return not self.failed


def load_pool(config: ExperimentConfig) -> MnistPool:
    """Load the MNIST split(s) selected by ``config.pool_splits``."""
    pools = []
    if config.pool_splits in ("train", "both"):
        if config.mnist_images is None or config.mnist_labels is None:
            raise ConfigError("--mnist-images and --mnist-labels are required")
        pools.append(load_idx(config.mnist_images, config.mnist_labels))
    if config.pool_splits in ("test", "both"):
        if config.mnist_test_images is None or config.mnist_test_labels is None:
            raise ConfigError("--mnist-test-images and --mnist-test-labels are required")
        pools.append(load_idx(config.mnist_test_images, config.mnist_test_labels))
    return functools.reduce(MnistPool.concat, pools)


def run_cell(
    pool: MnistPool, spec: TaskSpec, grid: ParamGrid, of_variant: str = "loo"
) -> CellResult:
    """Sample, train, evaluate and trace one cell."""
    split = sample_task(pool, spec)
    models = {regime: train(regime, split, grid, of_variant) for regime in Regime}
    curves = {regime: score_curve(regime, split, grid) for regime in Regime}
    return CellResult(spec, models, curves, evaluate(models, split))


_worker_pool: MnistPool | None = None


def _init_worker(pool: MnistPool):
    global _worker_pool
    _worker_pool = pool


def _run_cell_in_worker(spec: TaskSpec, grid: ParamGrid, of_variant: str) -> CellResult:
    return run_cell(_worker_pool, spec, grid, of_variant)


def _make_executor(config: ExperimentConfig, pool: MnistPool) -> tuple[Executor, object]:
    if config.workers == 1:
        executor = ThreadPoolExecutor(max_workers=1)
        return executor, functools.partial(run_cell, pool)
    executor = ProcessPoolExecutor(
        max_workers=config.workers, initializer=_init_worker, initargs=(pool,)
    )
    return executor, _run_cell_in_worker


def _cell_fields(spec: TaskSpec) -> dict:
    return {"digit": spec.digit_k, "n_size": spec.n_size, "replication": spec.replication_index}


def scores_frame(results) -> pd.DataFrame:
    """One row per cell: the four scores, the four rho values and the tie count."""
    rows = []
    for result in results:
        report = result.report
        row = _cell_fields(result.spec)
        row.update({score.column: report.score(score) for score in Score})
        row.update({f"rho_{regime.name.lower()}": result.models[regime].rho_star
                    for regime in Regime})
        row["ties"] = report.ties
        rows.append(row)
    columns = (CELL_COLUMNS + [score.column for score in Score]
               + [f"rho_{regime.name.lower()}" for regime in Regime] + ["ties"])
    return pd.DataFrame(rows, columns=columns)


def emit_curves(results) -> pd.DataFrame:
    """
    Training and test curves of every cell.

    The test curve of a regime is the test score its model feeds, evaluated at
    every grid point.
    """
    rows = []
    for result in results:
        cell = _cell_fields(result.spec)
        for regime in Regime:
            phases = (("train", result.models[regime].objective_curve),
                      ("test", result.test_curves[regime]))
            for phase, curve in phases:
                for rho, value in curve:
                    rows.append({**cell, "regime": regime.value, "rho": rho,
                                 "log_rho": math.log(rho), "phase": phase, "value": value})
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def aggregate(scores: pd.DataFrame) -> pd.DataFrame:
    """
    Per (digit, n_size, score) statistics over replications.

    Standard deviation uses the n - 1 denominator (0 for a single value);
    percentiles interpolate linearly between order statistics.
    """
    by_column = {score.column: score.value for score in Score}
    long = scores.melt(id_vars=CELL_COLUMNS, value_vars=list(by_column),
                       var_name="score", value_name="value")
    long["score"] = pd.Categorical(long["score"].map(by_column),
                                   categories=[score.value for score in Score], ordered=True)
    grouped = long.groupby(["digit", "n_size", "score"], observed=True, sort=True)["value"]
    summary = pd.DataFrame({
        "mean": grouped.mean(),
        "std": grouped.std(ddof=1).fillna(0.0),
        "median": grouped.median(),
        "p25": grouped.quantile(0.25, interpolation="linear"),
        "p75": grouped.quantile(0.75, interpolation="linear"),
        "count": grouped.count(),
    }).reset_index()
    summary["score"] = summary["score"].astype(str)
    return summary[SUMMARY_COLUMNS]


def consonance(summary: pd.DataFrame) -> pd.DataFrame:
    """Per n_size and test criterion, count digits where consonant training wins."""
    means = summary.pivot(index=["n_size", "digit"], columns="score", values="mean")
    rows = []
    for n_size, frame in means.groupby(level="n_size", sort=True):
        for criterion, (consonant, dissonant) in CONSONANCE_PAIRS.items():
            ours, theirs = frame[consonant.value], frame[dissonant.value]
            rows.append({
                "n_size": n_size,
                "criterion": criterion.value,
                "consonant_better": int((ours < theirs).sum()),
                "tied": int((ours == theirs).sum()),
                "dissonant_better": int((ours > theirs).sum()),
                "digits": len(frame),
            })
    return pd.DataFrame(rows, columns=["n_size", "criterion", "consonant_better", "tied",
                                       "dissonant_better", "digits"])


def format_tables(summary: pd.DataFrame) -> pd.DataFrame:
    """The four scores per (n_size, digit) as "mean ± std" with three decimals."""
    cells = summary.assign(
        cell=[f"{m:.3f} ± {s:.3f}" for m, s in zip(summary["mean"], summary["std"])]
    )
    table = cells.pivot(index=["n_size", "digit"], columns="score", values="cell")
    table = table[[score.value for score in Score]].reset_index()
    table.columns.name = None
    return table


def summarize_curves(curves: pd.DataFrame) -> pd.DataFrame:
    """
    Median and quartiles of every curve over replications, one row per
    (digit, n_size, regime, phase, grid point).

    Quartiles interpolate linearly, as in ``aggregate``.
    """
    regimes = [regime.value for regime in Regime]
    frame = curves.assign(regime=pd.Categorical(curves["regime"], categories=regimes,
                                                ordered=True))
    grouped = frame.groupby(["digit", "n_size", "regime", "phase", "rho"],
                            observed=True, sort=True)
    values = grouped["value"]
    summary = pd.DataFrame({
        "log_rho": grouped["log_rho"].first(),
        "median": values.median(),
        "p25": values.quantile(0.25, interpolation="linear"),
        "p75": values.quantile(0.75, interpolation="linear"),
        "mean": values.mean(),
        "count": values.count(),
    }).reset_index()
    summary["regime"] = summary["regime"].astype(str)
    return summary[CURVE_SUMMARY_COLUMNS]


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


def write_outputs(results, out: Path) -> dict[str, Path]:
    """Write every output table for ``results`` (already in cell order)."""
    out.mkdir(parents=True, exist_ok=True)
    scores = scores_frame(results)
    frames = {"scores": scores, "curves": emit_curves(results)}
    if results:
        summary = aggregate(scores)
        frames.update(summary=summary, consonance=consonance(summary),
                      tables=format_tables(summary),
                      curve_summary=summarize_curves(frames["curves"]))
    else:
        frames["summary"] = pd.DataFrame(columns=SUMMARY_COLUMNS)
    return {name: write_csv(frame, out / OUTPUT_FILES[name]) for name, frame in frames.items()}


async def run_experiment_async(
    config: ExperimentConfig, pool: MnistPool | None = None
) -> ExperimentOutcome:
    """
    Run every cell of ``config`` and write the outputs.

    Failed cells are logged with their coordinates and left out of the tables.
    """
    log = getLogger("pyconformaltrain.experiment")
    cells = config.cells()
    if pool is None:
        pool = load_pool(config)
    await log.info("running %d cells on %d worker(s)", len(cells), config.workers,
                   extra={"seed": config.seed, "out": config.out})
    loop = asyncio.get_running_loop()
    executor, run = _make_executor(config, pool)
    try:
        futures = [
            loop.run_in_executor(executor, run, spec, config.grid, config.of_variant)
            for spec in cells
        ]
        outcomes = await asyncio.gather(*futures, return_exceptions=True)
    finally:
        executor.shutdown(wait=True)

    results, failed = [], []
    for spec, outcome in zip(cells, outcomes):
        cell_log = log.bind(**_cell_fields(spec))
        if isinstance(outcome, BaseException):
            failed.append(spec)
            await cell_log.error("cell failed: %s: %s", type(outcome).__name__, outcome)
        else:
            results.append(outcome)
            await cell_log.debug("cell done")

    paths = write_outputs(results, Path(config.out))
    await log.info("wrote %s; %d of %d cells failed",
                   ", ".join(sorted(p.name for p in paths.values())), len(failed), len(cells))
    await drain_handlers()
    return ExperimentOutcome(paths, tuple(results), tuple(failed))


def run_experiment(config: ExperimentConfig, pool: MnistPool | None = None) -> ExperimentOutcome:
    """Synchronous wrapper around ``run_experiment_async``."""
    return asyncio.run(run_experiment_async(config, pool))


def default_workers() -> int:
    """Worker count from PYCONFORMALTRAIN_WORKERS, else 1."""
    value = os.getenv("PYCONFORMALTRAIN_WORKERS", "1")
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"PYCONFORMALTRAIN_WORKERS must be an integer, got {value!r}") from e
