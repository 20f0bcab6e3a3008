"""Biased Tucker factor model: parameters, predictions, loss, per-entry gradients.

A value at cell (i, j, k) is modeled as

    mean + sum_{m,n,l} core[m,n,l] * F1[i,m] * F2[j,n] * F3[k,l]
         + bias1[i] + bias2[j] + bias3[k]

where F1/F2/F3 are the per-mode factor matrices and core mixes their latent
dimensions.  The loss is one half the sum, over observed entries, of the
squared residual plus Tikhonov penalties on every parameter the entry touches
(core and factor rows inside the per-entry sum, so frequently observed rows
are penalized more).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

CHECKPOINT_FORMAT = "pidtucker-checkpoint-v1"


@dataclass(frozen=True)
class Ranks:
    """Latent dimensions per mode."""

    r1: int = 5
    r2: int = 5
    r3: int = 5

    def __post_init__(self):
        for name in ("r1", "r2", "r3"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"rank {name} must be >= 1, got {getattr(self, name)}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.r1, self.r2, self.r3)


@dataclass(frozen=True)
class RegWeights:
    """Tikhonov weights: lambda1 for the core, lambda2 for factor rows, lambda3 for biases."""

    lambda1: float = 0.01
    lambda2: float = 0.01
    lambda3: float = 0.01

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0.0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class TuckerFactors:
    """Model parameters; mutable because the trainer updates them in place.

    Attributes:
        dims: (|I|, |J|, |K|) mode sizes.
        ranks: latent dimensions.
        core: (r1, r2, r3) mixing tensor.
        factors: per-mode matrices of shapes (|I|, r1), (|J|, r2), (|K|, r3).
        biases: per-mode bias vectors of lengths |I|, |J|, |K|.
        mean: global additive offset (held fixed during training).
    """

    dims: tuple[int, int, int]
    ranks: Ranks
    core: np.ndarray
    factors: tuple[np.ndarray, np.ndarray, np.ndarray]
    biases: tuple[np.ndarray, np.ndarray, np.ndarray]
    mean: float


@dataclass
class InstanceGradient:
    """Gradient of one entry's loss summand w.r.t. everything the entry touches."""

    rows: tuple[np.ndarray, np.ndarray, np.ndarray]
    core: np.ndarray
    biases: tuple[float, float, float]


def init_factors(dims, ranks: Ranks, mean: float = 0.0, init_scale: float = 0.04,
                 seed: int = 0) -> TuckerFactors:
    """Seeded random initialization.

    Core and factor entries are i.i.d. uniform on (0, init_scale]; biases start
    at zero.  Draw order is factors (mode 1, 2, 3) then core, so results are
    reproducible for a fixed seed.
    """
    if not init_scale > 0:
        raise ConfigError(f"init_scale must be > 0, got {init_scale}")
    dims = tuple(int(x) for x in dims)
    rng = np.random.default_rng(seed)

    def draw(shape):
        # 1 - random() maps [0, 1) onto (0, 1].
        return init_scale * (1.0 - rng.random(shape))

    r1, r2, r3 = ranks.as_tuple()
    factors = tuple(draw((d, r)) for d, r in zip(dims, (r1, r2, r3)))
    core = draw((r1, r2, r3))
    biases = tuple(np.zeros(d) for d in dims)
    return TuckerFactors(dims, ranks, core, factors, biases, float(mean))


def _check_index(f: TuckerFactors, idx) -> tuple[int, int, int]:
    i, j, k = idx
    if not (0 <= i < f.dims[0] and 0 <= j < f.dims[1] and 0 <= k < f.dims[2]):
        raise DataError(f"index {(i, j, k)} out of bounds for dims {f.dims}")
    return i, j, k


def predict(f: TuckerFactors, idx) -> float:
    """Model value at one cell: mean + multilinear term + the three biases."""
    i, j, k = _check_index(f, idx)
    u = f.factors[0][i]
    d = f.factors[1][j]
    t = f.factors[2][k]
    phi = (f.core @ t) @ d
    return float(f.mean + u @ phi + f.biases[0][i] + f.biases[1][j] + f.biases[2][k])


def predict_unbiased(f: TuckerFactors, idx) -> float:
    """Multilinear term alone, without mean or biases."""
    i, j, k = _check_index(f, idx)
    return float(f.factors[0][i] @ ((f.core @ f.factors[2][k]) @ f.factors[1][j]))


def predict_batch(f: TuckerFactors, indices) -> np.ndarray:
    """Vectorized predict over an (n, 3) index array."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return np.zeros(0)
    if idx.ndim != 2 or idx.shape[1] != 3:
        raise DataError(f"indices must have shape (n, 3), got {idx.shape}")
    if (idx < 0).any() or (idx >= np.asarray(f.dims, dtype=np.int64)).any():
        pos = int(np.argmax(((idx < 0) | (idx >= np.asarray(f.dims))).any(axis=1)))
        raise DataError(f"index {tuple(idx[pos])} out of bounds for dims {f.dims}")
    ii, jj, kk = idx[:, 0], idx[:, 1], idx[:, 2]
    multi = np.einsum(
        "mnl,em,en,el->e", f.core, f.factors[0][ii], f.factors[1][jj], f.factors[2][kk]
    )
    return f.mean + multi + f.biases[0][ii] + f.biases[1][jj] + f.biases[2][kk]


def reconstruct_dense(f: TuckerFactors, max_cells: int = 1_000_000) -> np.ndarray:
    """Full dense reconstruction via sequential mode products; test-scale oracle.

    Cell (i, j, k) of the result equals predict(f, (i, j, k)).  Refuses tensors
    larger than max_cells.
    """
    n_cells = f.dims[0] * f.dims[1] * f.dims[2]
    if n_cells > max_cells:
        raise DataError(
            f"dense reconstruction of {n_cells} cells exceeds the cap of {max_cells}"
        )
    out = np.tensordot(f.factors[0], f.core, axes=(1, 0))   # (|I|, r2, r3)
    out = np.tensordot(out, f.factors[1], axes=(1, 1))      # (|I|, r3, |J|)
    out = np.tensordot(out, f.factors[2], axes=(1, 1))      # (|I|, |J|, |K|)
    out += f.mean
    out += f.biases[0][:, None, None]
    out += f.biases[1][None, :, None]
    out += f.biases[2][None, None, :]
    return out


def instance_error(f: TuckerFactors, idx, y: float) -> float:
    """Residual y - predict(f, idx) for one observed entry."""
    return float(y) - predict(f, idx)


def regularized_loss(f: TuckerFactors, indices, values, reg: RegWeights) -> float:
    """Half the sum over entries of squared residual plus per-entry Tikhonov penalties.

    Each entry's summand penalizes the full core (lambda1), the three factor
    rows it touches (lambda2), and its three bias components (lambda3).
    """
    idx = np.asarray(indices, dtype=np.int64)
    vals = np.asarray(values, dtype=np.float64)
    if idx.size == 0:
        return 0.0
    resid = vals - predict_batch(f, idx)
    ii, jj, kk = idx[:, 0], idx[:, 1], idx[:, 2]
    n = len(vals)
    total = float(resid @ resid)
    total += reg.lambda1 * float(np.sum(f.core**2)) * n
    total += reg.lambda2 * float(
        np.sum(f.factors[0][ii] ** 2)
        + np.sum(f.factors[1][jj] ** 2)
        + np.sum(f.factors[2][kk] ** 2)
    )
    total += reg.lambda3 * float(
        np.sum(f.biases[0][ii] ** 2) + np.sum(f.biases[1][jj] ** 2) + np.sum(f.biases[2][kk] ** 2)
    )
    return 0.5 * total


def instance_gradient(f: TuckerFactors, idx, err: float, reg: RegWeights) -> InstanceGradient:
    """Gradient of one entry's loss summand, with `err` in place of the raw residual.

    Passing the raw residual gives the plain stochastic gradient; passing a
    PID-adjusted residual gives the adjusted update direction.  The core
    gradient is per element: lambda1 * core[m,n,l] - err * u[m] * d[n] * t[l].
    """
    i, j, k = _check_index(f, idx)
    u = f.factors[0][i]
    d = f.factors[1][j]
    t = f.factors[2][k]
    core = f.core
    r1 = core.shape[0]

    gt = core @ t                                  # (r1, r2): sum over l
    phi = gt @ d                                   # d/du of the multilinear term
    psi = u @ gt                                   # d/dd
    chi = d @ (u @ core.reshape(r1, -1)).reshape(core.shape[1], core.shape[2])  # d/dt
    outer = (u[:, None] * d)[:, :, None] * t       # u x d x t

    rows = (
        reg.lambda2 * u - err * phi,
        reg.lambda2 * d - err * psi,
        reg.lambda2 * t - err * chi,
    )
    core_grad = reg.lambda1 * core - err * outer
    biases = (
        reg.lambda3 * float(f.biases[0][i]) - err,
        reg.lambda3 * float(f.biases[1][j]) - err,
        reg.lambda3 * float(f.biases[2][k]) - err,
    )
    return InstanceGradient(rows, core_grad, biases)


def save_checkpoint(f: TuckerFactors, path) -> None:
    """Write factors to a flat binary checkpoint.

    Layout: one JSON header line (format tag, dims, ranks, mean) followed by
    the raw little-endian float64 bytes of the three factor matrices, the
    core, and the three bias vectors, each in row-major order.  Output is
    byte-deterministic for identical factors.
    """
    header = {
        "format": CHECKPOINT_FORMAT,
        "dims": list(f.dims),
        "ranks": list(f.ranks.as_tuple()),
        "mean": f.mean,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for arr in (*f.factors, f.core, *f.biases):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> TuckerFactors:
    """Read a checkpoint written by save_checkpoint."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: not a checkpoint file ({exc})") from None
        if header.get("format") != CHECKPOINT_FORMAT:
            raise DataError(f"{path}: unsupported checkpoint format {header.get('format')!r}")
        dims = tuple(int(x) for x in header["dims"])
        ranks = Ranks(*(int(x) for x in header["ranks"]))
        payload = fh.read()

    shapes = [
        (dims[0], ranks.r1),
        (dims[1], ranks.r2),
        (dims[2], ranks.r3),
        ranks.as_tuple(),
        (dims[0],),
        (dims[1],),
        (dims[2],),
    ]
    expected = sum(int(np.prod(s)) for s in shapes) * 8
    if len(payload) != expected:
        raise DataError(
            f"{path}: checkpoint payload is {len(payload)} bytes, expected {expected}"
        )
    arrays = []
    offset = 0
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(
            np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset += count * 8
    return TuckerFactors(
        dims=dims,
        ranks=ranks,
        core=arrays[3],
        factors=(arrays[0], arrays[1], arrays[2]),
        biases=(arrays[4], arrays[5], arrays[6]),
        mean=float(header["mean"]),
    )
