"""COO storage and train/validation/test partitioning for 3-mode sparse tensors.

Only the observed cells of a (mostly missing) tensor are kept: an (n, 3)
integer index array plus an (n,) value array, in insertion order.  Training
code shuffles separate position permutations instead of reordering storage,
so per-entry state (e.g. PID error history) can be keyed by stable position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

RATIO_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SparseTensor:
    """Observed entries of a 3-mode tensor.

    Attributes:
        dims: (|I|, |J|, |K|) mode sizes.
        indices: (n, 3) int64 array of zero-based cell coordinates.
        values: (n,) float64 array of observed values.
    """

    dims: tuple[int, int, int]
    indices: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def density(self) -> float:
        return len(self) / self.n_cells


@dataclass(frozen=True)
class DataSplit:
    """Disjoint train/validation/test positions into a SparseTensor's entries."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def parts(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.train, self.validation, self.test


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def from_records(dims, records) -> SparseTensor:
    """Build a SparseTensor from (i, j, k, value) records.

    Raises DataError for non-positive dims, out-of-bounds indices (naming the
    offending record), duplicate coordinates (naming both positions), or
    non-finite values.
    """
    dims = tuple(int(x) for x in dims)
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise DataError(f"dims must be three positive integers, got {dims}")

    records = list(records)
    n = len(records)
    indices = np.zeros((n, 3), dtype=np.int64)
    values = np.zeros(n, dtype=np.float64)
    for pos, rec in enumerate(records):
        i, j, k, v = rec
        indices[pos] = (i, j, k)
        values[pos] = v

    if n:
        oob = (indices < 0) | (indices >= np.asarray(dims, dtype=np.int64))
        if oob.any():
            pos = int(np.argmax(oob.any(axis=1)))
            raise DataError(
                f"record {pos} has out-of-bounds index {tuple(indices[pos])} "
                f"for dims {dims}"
            )
        bad = ~np.isfinite(values)
        if bad.any():
            pos = int(np.argmax(bad))
            raise DataError(f"record {pos} has non-finite value {values[pos]}")
        order = np.lexsort((indices[:, 2], indices[:, 1], indices[:, 0]))
        ordered = indices[order]
        dup = np.all(ordered[1:] == ordered[:-1], axis=1)
        if dup.any():
            at = int(np.argmax(dup))
            first, second = sorted((int(order[at]), int(order[at + 1])))
            raise DataError(
                f"duplicate index {tuple(ordered[at])} at record positions "
                f"{first} and {second}"
            )

    return SparseTensor(dims, _freeze(indices), _freeze(values))


def split(tensor: SparseTensor, ratios, seed: int) -> DataSplit:
    """Seeded uniform partition of entry positions into train/validation/test.

    Part sizes are floor(n * ratio) with the remainder going to the test set,
    keeping the scarce train/validation parts at their exact intended sizes.
    Deterministic for a fixed (tensor, ratios, seed).

    Raises DataError if the ratios are invalid or any part would be empty.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise DataError(f"ratios must be three positive reals, got {ratios}")
    if abs(sum(ratios) - 1.0) > RATIO_SUM_TOL:
        raise DataError(f"ratios must sum to 1, got sum {sum(ratios)!r}")

    n = len(tensor)
    n_train = math.floor(n * ratios[0])
    n_val = math.floor(n * ratios[1])
    n_test = n - n_train - n_val
    sizes = {"train": n_train, "validation": n_val, "test": n_test}
    empty = [name for name, size in sizes.items() if size <= 0]
    if empty:
        raise DataError(
            f"split of {n} entries at ratios {ratios} leaves empty part(s): "
            f"{', '.join(empty)}"
        )

    perm = np.random.default_rng(seed).permutation(n)
    return DataSplit(
        train=_freeze(perm[:n_train].copy()),
        validation=_freeze(perm[n_train : n_train + n_val].copy()),
        test=_freeze(perm[n_train + n_val :].copy()),
    )
