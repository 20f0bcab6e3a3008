"""CSV ingestion, synthetic ground-truth fixtures, and imputation export.

The sole ingestion format is a UTF-8 CSV with a header and four columns
(segment id, day, time slot, speed); column names and the number of slots per
day come from a CsvSchema.  Missing cells are encoded purely by row absence;
a speed of zero is a valid observation.  Distinct segment ids and days map to
contiguous indices in deterministic sorted order (numeric when every id
parses as a number, lexicographic otherwise), and the mapping is kept in a
JSON sidecar so imputations can be written back under original identifiers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .model import Ranks, TuckerFactors, predict_batch
from .sparse import SparseTensor, from_records

MAPPING_FORMAT = "pidtucker-mapping-v1"


@dataclass(frozen=True)
class CsvSchema:
    """Column names and slot count for speed-record CSV files."""

    segment: str = "segment"
    day: str = "day"
    slot: str = "slot"
    speed: str = "speed"
    slots_per_day: int = 288

    def __post_init__(self):
        if self.slots_per_day < 1:
            raise ConfigError(f"slots_per_day must be >= 1, got {self.slots_per_day}")


@dataclass(frozen=True)
class IndexMapping:
    """Original segment/day identifiers in index order, plus the slot count."""

    segments: tuple[str, ...]
    days: tuple[str, ...]
    slots_per_day: int

    @property
    def dims(self) -> tuple[int, int, int]:
        return (len(self.segments), len(self.days), self.slots_per_day)


def save_mapping(mapping: IndexMapping, path) -> None:
    payload = {
        "format": MAPPING_FORMAT,
        "segments": list(mapping.segments),
        "days": list(mapping.days),
        "slots_per_day": mapping.slots_per_day,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_mapping(path) -> IndexMapping:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MAPPING_FORMAT:
        raise DataError(f"{path}: unsupported mapping format {payload.get('format')!r}")
    return IndexMapping(
        segments=tuple(payload["segments"]),
        days=tuple(payload["days"]),
        slots_per_day=int(payload["slots_per_day"]),
    )


def _sorted_ids(ids) -> list[str]:
    """Sort ids numerically when they all parse as numbers, else lexicographically."""
    ids = list(ids)
    try:
        return sorted(ids, key=lambda s: (float(s), s))
    except ValueError:
        return sorted(ids)


def load_csv(path, schema: CsvSchema) -> tuple[SparseTensor, IndexMapping]:
    """Read speed records into a SparseTensor plus its id-to-index mapping.

    Mode sizes are (distinct segments, distinct days, schema.slots_per_day).
    Raises DataError naming the line for malformed rows, out-of-range slots,
    negative or non-finite speeds, and duplicated (segment, day, slot) cells.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read data file: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        columns = (schema.segment, schema.day, schema.slot, schema.speed)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing required column(s) {missing}")

        rows: list[tuple[str, str, int, float]] = []
        seen: dict[tuple[str, str, int], int] = {}
        for lineno, row in enumerate(reader, start=2):
            seg = row[schema.segment]
            day = row[schema.day]
            try:
                slot = int(row[schema.slot])
                speed = float(row[schema.speed])
            except (TypeError, ValueError):
                raise DataError(f"{path}: malformed row at line {lineno}: {row}") from None
            if seg is None or day is None or seg == "" or day == "":
                raise DataError(f"{path}: malformed row at line {lineno}: {row}")
            if not 0 <= slot < schema.slots_per_day:
                raise DataError(
                    f"{path}: line {lineno}: slot {slot} out of range "
                    f"[0, {schema.slots_per_day})"
                )
            if not math.isfinite(speed) or speed < 0:
                raise DataError(f"{path}: line {lineno}: invalid speed {speed}")
            key = (seg, day, slot)
            if key in seen:
                raise DataError(
                    f"{path}: duplicate (segment, day, slot) {key} at lines "
                    f"{seen[key]} and {lineno}"
                )
            seen[key] = lineno
            rows.append((seg, day, slot, speed))

    if not rows:
        raise DataError(f"{path}: no data rows")

    mapping = IndexMapping(
        segments=tuple(_sorted_ids({r[0] for r in rows})),
        days=tuple(_sorted_ids({r[1] for r in rows})),
        slots_per_day=schema.slots_per_day,
    )
    seg_index = {s: i for i, s in enumerate(mapping.segments)}
    day_index = {d: j for j, d in enumerate(mapping.days)}
    records = [(seg_index[seg], day_index[day], slot, speed)
               for seg, day, slot, speed in rows]
    return from_records(mapping.dims, records), mapping


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded ground-truth fixture of known Tucker structure."""

    dims: tuple[int, int, int]
    ranks: Ranks
    observed_fraction: float
    noise_sigma: float = 0.0
    value_offset: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.observed_fraction <= 1.0:
            raise ConfigError(
                f"observed_fraction must be in (0, 1], got {self.observed_fraction}"
            )
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        cells = self.dims[0] * self.dims[1] * self.dims[2]
        if self.observed_fraction * cells < 10:
            raise ConfigError(
                f"observed_fraction {self.observed_fraction} of {cells} cells "
                f"leaves fewer than 10 entries"
            )


def generate_synthetic(spec: SyntheticSpec) -> tuple[SparseTensor, TuckerFactors]:
    """Sample a ground-truth model and an observed subset of its cells.

    Factor and core entries are i.i.d. uniform on (0, 1], biases uniform on
    (-0.5, 0.5], and the global offset is value_offset.  Cells are drawn
    uniformly without replacement at observed_fraction; observed values are
    the model value plus Gaussian noise of the given sigma.  Fully
    deterministic per seed (draw order: factors, core, biases, cells, noise).
    """
    rng = np.random.default_rng(spec.seed)
    dims = tuple(int(x) for x in spec.dims)
    r1, r2, r3 = spec.ranks.as_tuple()

    factors = tuple(1.0 - rng.random((d, r)) for d, r in zip(dims, (r1, r2, r3)))
    core = 1.0 - rng.random((r1, r2, r3))
    biases = tuple(0.5 - rng.random(d) for d in dims)
    truth = TuckerFactors(dims, spec.ranks, core, factors, biases,
                          float(spec.value_offset))

    n_cells = dims[0] * dims[1] * dims[2]
    n_obs = int(round(spec.observed_fraction * n_cells))
    flat = np.sort(rng.choice(n_cells, size=n_obs, replace=False))
    ii, jj, kk = np.unravel_index(flat, dims)
    indices = np.column_stack((ii, jj, kk)).astype(np.int64)

    values = predict_batch(truth, indices)
    if spec.noise_sigma > 0:
        values = values + rng.normal(0.0, spec.noise_sigma, size=n_obs)

    records = [(int(a), int(b), int(c), float(v))
               for (a, b, c), v in zip(indices, values)]
    return from_records(dims, records), truth


def identity_mapping(dims) -> IndexMapping:
    """Mapping whose original ids are the stringified indices themselves."""
    return IndexMapping(
        segments=tuple(str(i) for i in range(dims[0])),
        days=tuple(str(j) for j in range(dims[1])),
        slots_per_day=int(dims[2]),
    )


def missing_indices(tensor: SparseTensor) -> np.ndarray:
    """All cells of the tensor grid that carry no observation, row-major order."""
    flat_obs = np.ravel_multi_index(
        (tensor.indices[:, 0], tensor.indices[:, 1], tensor.indices[:, 2]), tensor.dims
    )
    flat_missing = np.setdiff1d(np.arange(tensor.n_cells), flat_obs)
    ii, jj, kk = np.unravel_index(flat_missing, tensor.dims)
    return np.column_stack((ii, jj, kk)).astype(np.int64)


def write_records_csv(indices, values, mapping: IndexMapping, path,
                      schema: CsvSchema | None = None) -> None:
    """Write observed entries as a speed-record CSV (6 decimal places)."""
    schema = schema or CsvSchema()
    idx = np.asarray(indices, dtype=np.int64)
    vals = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"{schema.segment},{schema.day},{schema.slot},{schema.speed}\n")
        for (i, j, k), v in zip(idx.tolist(), vals.tolist()):
            fh.write(f"{mapping.segments[i]},{mapping.days[j]},{k},{v:.6f}\n")


def export_imputed(f: TuckerFactors, targets, mapping: IndexMapping, path) -> None:
    """Write model values for the target cells under original identifiers.

    Output CSV: segment_id,day,slot,predicted_speed with 6 decimal places.
    """
    if mapping.dims != tuple(f.dims):
        raise DataError(
            f"mapping dims {mapping.dims} do not match checkpoint dims {tuple(f.dims)}"
        )
    idx = np.asarray(targets, dtype=np.int64).reshape(-1, 3)
    preds = predict_batch(f, idx) if len(idx) else np.zeros(0)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("segment_id,day,slot,predicted_speed\n")
        for (i, j, k), v in zip(idx.tolist(), preds.tolist()):
            fh.write(f"{mapping.segments[i]},{mapping.days[j]},{k},{v:.6f}\n")


def read_entries_csv(path, schema: CsvSchema,
                     mapping: IndexMapping) -> tuple[np.ndarray, np.ndarray]:
    """Read speed records and map ids through an existing mapping.

    Unlike load_csv, the index assignment is taken from `mapping` (the one a
    checkpoint was trained with); ids absent from the mapping are an error.
    """
    seg_index = {s: i for i, s in enumerate(mapping.segments)}
    day_index = {d: j for j, d in enumerate(mapping.days)}
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read data file: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        columns = (schema.segment, schema.day, schema.slot, schema.speed)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing required column(s) {missing}")
        indices = []
        values = []
        for lineno, row in enumerate(reader, start=2):
            seg, day = row[schema.segment], row[schema.day]
            try:
                slot = int(row[schema.slot])
                speed = float(row[schema.speed])
            except (TypeError, ValueError):
                raise DataError(f"{path}: malformed row at line {lineno}: {row}") from None
            if seg not in seg_index:
                raise DataError(f"{path}: line {lineno}: unknown segment id {seg!r}")
            if day not in day_index:
                raise DataError(f"{path}: line {lineno}: unknown day {day!r}")
            if not 0 <= slot < mapping.slots_per_day:
                raise DataError(
                    f"{path}: line {lineno}: slot {slot} out of range "
                    f"[0, {mapping.slots_per_day})"
                )
            if not math.isfinite(speed) or speed < 0:
                raise DataError(f"{path}: line {lineno}: invalid speed {speed}")
            indices.append((seg_index[seg], day_index[day], slot))
            values.append(speed)
    if not values:
        raise DataError(f"{path}: no data rows")
    return (np.asarray(indices, dtype=np.int64).reshape(-1, 3),
            np.asarray(values, dtype=np.float64))


def read_targets_csv(path, schema: CsvSchema, mapping: IndexMapping) -> np.ndarray:
    """Read (segment, day, slot) target cells and map them to indices."""
    seg_index = {s: i for i, s in enumerate(mapping.segments)}
    day_index = {d: j for j, d in enumerate(mapping.days)}
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read targets file: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        needed = (schema.segment, schema.day, schema.slot)
        missing = [c for c in needed if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing required column(s) {missing}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            seg, day = row[schema.segment], row[schema.day]
            try:
                slot = int(row[schema.slot])
            except (TypeError, ValueError):
                raise DataError(f"{path}: malformed row at line {lineno}: {row}") from None
            if seg not in seg_index:
                raise DataError(f"{path}: line {lineno}: unknown segment id {seg!r}")
            if day not in day_index:
                raise DataError(f"{path}: line {lineno}: unknown day {day!r}")
            if not 0 <= slot < mapping.slots_per_day:
                raise DataError(
                    f"{path}: line {lineno}: slot {slot} out of range "
                    f"[0, {mapping.slots_per_day})"
                )
            out.append((seg_index[seg], day_index[day], slot))
    return np.asarray(out, dtype=np.int64).reshape(-1, 3)
