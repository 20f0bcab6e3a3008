"""Held-out RMSE and the repeated split/train/test experiment protocol."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, DivergenceError
from .model import TuckerFactors, predict_batch
from .solver import Hyperparams, train
from .sparse import SparseTensor, split


def rmse(f: TuckerFactors, indices, values) -> float:
    """Root mean squared error of model predictions over a held-out entry set."""
    idx = np.asarray(indices, dtype=np.int64)
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise DataError("rmse over an empty entry set is undefined")
    resid = vals - predict_batch(f, idx)
    return float(np.sqrt(np.mean(resid * resid)))


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol for repeated evaluation: re-split, re-train, re-test per repeat."""

    hyper: Hyperparams
    ratios: tuple[float, float, float] = (0.08, 0.02, 0.90)
    repeats: int = 20
    base_seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")


@dataclass(frozen=True)
class RepeatResult:
    repeat: int
    seed: int
    rmse: float | None
    epochs: int | None
    seconds: float | None
    error: str | None = None


@dataclass
class ExperimentSummary:
    """Per-repeat outcomes plus mean/std aggregates over the successful ones."""

    results: list[RepeatResult]
    rmse_mean: float
    rmse_std: float
    seconds_mean: float
    seconds_std: float


def _aggregate(xs: list[float]) -> tuple[float, float]:
    if not xs:
        return float("nan"), float("nan")
    mean = float(np.mean(xs))
    std = float(np.std(xs, ddof=1)) if len(xs) > 1 else 0.0
    return mean, std


def run_experiment(tensor: SparseTensor, cfg: ExperimentConfig,
                   jobs: int = 1) -> ExperimentSummary:
    """Run `repeats` independent split/train/test rounds and aggregate test RMSE.

    Repeat r uses seed base_seed + r for both the split and the model
    initialization.  Wall time covers training only.  A failing repeat is
    recorded with its error message and does not abort the others.  Results
    are deterministic for a fixed (tensor, cfg) regardless of `jobs`.
    """

    def one(r: int) -> RepeatResult:
        seed = cfg.base_seed + r
        try:
            parts = split(tensor, cfg.ratios, seed)
            hyper = replace(cfg.hyper, seed=seed)
            t0 = time.perf_counter()
            f, report = train(tensor, parts, hyper)
            seconds = time.perf_counter() - t0
            test_rmse = rmse(f, tensor.indices[parts.test], tensor.values[parts.test])
            return RepeatResult(r, seed, test_rmse, report.epochs_run, seconds)
        except (DataError, DivergenceError) as exc:
            return RepeatResult(r, seed, None, None, None,
                                error=f"{type(exc).__name__}: {exc}")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(cfg.repeats)))
    else:
        results = [one(r) for r in range(cfg.repeats)]

    ok = [r for r in results if r.error is None]
    rmse_mean, rmse_std = _aggregate([r.rmse for r in ok])
    sec_mean, sec_std = _aggregate([r.seconds for r in ok])
    return ExperimentSummary(results, rmse_mean, rmse_std, sec_mean, sec_std)


def summary_to_dict(summary: ExperimentSummary) -> dict:
    return {
        "rmse_mean": summary.rmse_mean,
        "rmse_std": summary.rmse_std,
        "seconds_mean": summary.seconds_mean,
        "seconds_std": summary.seconds_std,
        "repeats": [
            {
                "repeat": r.repeat,
                "seed": r.seed,
                "rmse": r.rmse,
                "epochs": r.epochs,
                "seconds": r.seconds,
                "error": r.error,
            }
            for r in summary.results
        ],
    }


def write_summary_json(summary: ExperimentSummary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary_to_dict(summary), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_summary_csv(summary: ExperimentSummary, path) -> None:
    """Flat per-repeat CSV: repeat,rmse,epochs,seconds (blank fields on failure)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("repeat,rmse,epochs,seconds\n")
        for r in summary.results:
            if r.error is None:
                fh.write(f"{r.repeat},{r.rmse!r},{r.epochs},{r.seconds:.6f}\n")
            else:
                fh.write(f"{r.repeat},,,\n")
