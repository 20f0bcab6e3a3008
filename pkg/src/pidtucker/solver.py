"""Sequential SGD training loop with PID residual adjustment and early stopping.

One epoch visits every training entry once (seeded shuffle by default).  For
each entry the residual is computed from current parameters, optionally
PID-adjusted, and all touched parameters are updated simultaneously from
their pre-update values.  Training stops when the validation RMSE changes by
less than `tol` between consecutive epochs, or at the epoch cap.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DivergenceError
from .model import (
    Ranks,
    RegWeights,
    TuckerFactors,
    init_factors,
    predict,
    predict_batch,
    regularized_loss,
)
from .pid import PidGains, PidState, adjust
from .sparse import DataSplit, SparseTensor


@dataclass(frozen=True)
class Hyperparams:
    """Everything that determines a training run besides the data itself."""

    eta: float = 0.01
    reg: RegWeights = field(default_factory=RegWeights)
    gains: PidGains = field(default_factory=PidGains)
    ranks: Ranks = field(default_factory=Ranks)
    max_epochs: int = 1000
    tol: float = 1e-5
    init_scale: float = 0.04
    seed: int = 0
    shuffle: bool = True
    plain_sgd: bool = False          # bypass the PID adjustment entirely
    error_clamp: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ConfigError(f"eta must be finite and > 0, got {self.eta}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise ConfigError(f"tol must be finite and > 0, got {self.tol}")
        if not (math.isfinite(self.init_scale) and self.init_scale > 0):
            raise ConfigError(f"init_scale must be > 0, got {self.init_scale}")
        if self.error_clamp is not None and not self.error_clamp > 0:
            raise ConfigError(f"error_clamp must be > 0 when set, got {self.error_clamp}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_rmse: float
    elapsed_s: float


@dataclass
class TrainReport:
    """Per-epoch trace plus stopping outcome of one training run."""

    epochs_run: int
    converged: bool
    records: list[EpochRecord]
    final_val_rmse: float
    best_epoch: int


def validation_converged(history, tol: float) -> bool:
    """Stopping rule: the last two validation errors differ by less than tol."""
    return len(history) >= 2 and abs(history[-1] - history[-2]) < tol


def sgd_step(f: TuckerFactors, idx, y: float, adjusted_err: float,
             hyper: Hyperparams) -> None:
    """Apply one entry's update in place.

    All gradient pieces are formed from pre-update parameter values, then the
    touched factor rows, the full core, and the three bias components move one
    step of size eta against them.  lambda2 regularizes factor rows, lambda1
    the core, lambda3 the biases.
    """
    if not math.isfinite(adjusted_err):
        raise DivergenceError(
            f"non-finite update at entry {tuple(int(x) for x in idx)} (y={y!r})"
        )
    i, j, k = idx
    eta = hyper.eta
    l1, l2, l3 = hyper.reg.lambda1, hyper.reg.lambda2, hyper.reg.lambda3
    factor1, factor2, factor3 = f.factors
    bias1, bias2, bias3 = f.biases
    core = f.core

    u = factor1[i]
    d = factor2[j]
    t = factor3[k]
    gt = core @ t
    phi = gt @ d
    psi = u @ gt
    chi = d @ (u @ core.reshape(core.shape[0], -1)).reshape(core.shape[1], core.shape[2])
    outer = (u[:, None] * d)[:, :, None] * t

    # Writes only after every read of the pre-update values.
    factor1[i] = u - eta * (l2 * u - adjusted_err * phi)
    factor2[j] = d - eta * (l2 * d - adjusted_err * psi)
    factor3[k] = t - eta * (l2 * t - adjusted_err * chi)
    core -= eta * (l1 * core - adjusted_err * outer)
    bias1[i] -= eta * (l3 * bias1[i] - adjusted_err)
    bias2[j] -= eta * (l3 * bias2[j] - adjusted_err)
    bias3[k] -= eta * (l3 * bias3[k] - adjusted_err)


def _all_finite(f: TuckerFactors) -> bool:
    return (
        np.isfinite(f.core).all()
        and all(np.isfinite(m).all() for m in f.factors)
        and all(np.isfinite(v).all() for v in f.biases)
    )


def train(tensor: SparseTensor, data_split: DataSplit,
          hyper: Hyperparams) -> tuple[TuckerFactors, TrainReport]:
    """Fit factors to the training part; early-stop on the validation part.

    The global mean is set once from training values and held fixed.  The
    shuffle order for epoch f (1-based) is drawn from seed + f, so a run is a
    pure function of (tensor, data_split, hyper).  Returns the final-epoch
    factors; the best validation epoch is recorded in the report.
    """
    for name, part in zip(("train", "validation", "test"), data_split.parts()):
        if len(part) == 0:
            raise DataError(f"{name} split part is empty")

    train_idx = tensor.indices[data_split.train]
    train_val = tensor.values[data_split.train]
    n_train = len(train_val)
    mean = float(np.mean(train_val))
    f = init_factors(tensor.dims, hyper.ranks, mean=mean,
                     init_scale=hyper.init_scale, seed=hyper.seed)
    state = None if hyper.plain_sgd else PidState(n_train)

    # Plain-python copies keep the per-entry loop off numpy scalar overhead.
    idx_rows = [tuple(row) for row in train_idx.tolist()]
    ys = train_val.tolist()

    val_idx = tensor.indices[data_split.validation]
    val_y = tensor.values[data_split.validation]

    gains = hyper.gains
    clamp = hyper.error_clamp
    records: list[EpochRecord] = []
    val_history: list[float] = []
    converged = False
    start = time.perf_counter()

    for epoch in range(1, hyper.max_epochs + 1):
        if hyper.shuffle:
            order = np.random.default_rng(hyper.seed + epoch).permutation(n_train).tolist()
        else:
            order = range(n_train)
        try:
            # Overflow on the way to divergence is detected and reported below;
            # silence the interim numpy warnings.
            with np.errstate(over="ignore", invalid="ignore"):
                for pos in order:
                    idx = idx_rows[pos]
                    e = ys[pos] - predict(f, idx)
                    if hyper.plain_sgd:
                        err = e
                    else:
                        err = adjust(state, gains, pos, e, clamp)
                    sgd_step(f, idx, ys[pos], err, hyper)
        except DivergenceError as exc:
            raise DivergenceError(f"epoch {epoch}: {exc}") from None
        if not _all_finite(f):
            raise DivergenceError(f"epoch {epoch}: parameters became non-finite")

        train_loss = regularized_loss(f, train_idx, train_val, hyper.reg)
        resid = val_y - predict_batch(f, val_idx)
        val_rmse = float(np.sqrt(np.mean(resid * resid)))
        records.append(EpochRecord(epoch, train_loss, val_rmse,
                                   time.perf_counter() - start))
        val_history.append(val_rmse)
        if validation_converged(val_history, hyper.tol):
            converged = True
            break

    best_epoch = 1 + int(np.argmin([r.val_rmse for r in records]))
    report = TrainReport(
        epochs_run=len(records),
        converged=converged,
        records=records,
        final_val_rmse=records[-1].val_rmse,
        best_epoch=best_epoch,
    )
    return f, report


def impute(f: TuckerFactors, indices) -> np.ndarray:
    """Model values for a batch of cells (typically the missing ones)."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return np.zeros(0)
    return predict_batch(f, idx.reshape(-1, 3))


def write_trace(report: TrainReport, path) -> None:
    """Per-epoch trace CSV: epoch,train_loss,val_rmse,elapsed_s."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,train_loss,val_rmse,elapsed_s\n")
        for rec in report.records:
            fh.write(f"{rec.epoch},{rec.train_loss!r},{rec.val_rmse!r},{rec.elapsed_s:.6f}\n")
