# The file-based workflow: speed records in, imputed speeds out.
#
# Input is a UTF-8 CSV with a header and four columns (segment id, day,
# time slot, speed).  Missing cells are simply absent rows; a speed of 0 is
# a valid congestion reading.  Segment and day identifiers can be arbitrary
# strings; they are mapped to contiguous indices in sorted order and the
# mapping is kept so outputs use the original identifiers.

import tempfile
from pathlib import Path

from pidtucker import (
    CsvSchema,
    Hyperparams,
    Ranks,
    export_imputed,
    load_csv,
    missing_indices,
    rmse,
    save_mapping,
    split,
    train,
)

workdir = Path(tempfile.mkdtemp(prefix="speeds-"))

# ---------------------------------------------------------------------------
# 1. A tiny hand-written dataset: 3 sensors, 2 days, 4 slots per day, with
#    several cells missing.  Real exports use the same shape, just bigger.
# ---------------------------------------------------------------------------
rows = """\
sensor,date,interval,kmh
S-101,2024-03-04,0,52.1
S-101,2024-03-04,1,48.7
S-101,2024-03-04,2,31.2
S-101,2024-03-05,0,54.0
S-101,2024-03-05,3,49.9
S-205,2024-03-04,0,33.4
S-205,2024-03-04,3,35.8
S-205,2024-03-05,1,30.1
S-205,2024-03-05,2,28.9
S-309,2024-03-04,1,61.0
S-309,2024-03-04,2,58.3
S-309,2024-03-05,0,63.5
S-309,2024-03-05,3,60.2
"""
data_path = workdir / "speeds.csv"
data_path.write_text(rows)

schema = CsvSchema(segment="sensor", day="date", slot="interval", speed="kmh",
                   slots_per_day=4)
tensor, mapping = load_csv(data_path, schema)
print(f"loaded {len(tensor)} readings into a {tensor.dims} tensor "
      f"(density {tensor.density:.2f})")
print(f"sensors: {mapping.segments}")
print(f"days:    {mapping.days}")

# keep the id mapping next to the model so later runs can decode indices
save_mapping(mapping, workdir / "mapping.json")

# ---------------------------------------------------------------------------
# 2. Train on most of the readings.  A dataset this small is only a smoke
#    test, so the quality numbers are not meaningful; the mechanics are.
# ---------------------------------------------------------------------------
parts = split(tensor, (0.7, 0.15, 0.15), seed=1)
factors, report = train(tensor, parts, Hyperparams(ranks=Ranks(2, 2, 2),
                                                   max_epochs=50, seed=1))
print(f"trained {report.epochs_run} epochs; held-out RMSE "
      f"{rmse(factors, tensor.indices[parts.test], tensor.values[parts.test]):.2f} km/h")

# ---------------------------------------------------------------------------
# 3. Impute every cell that has no reading and write them under the original
#    identifiers, 6 decimal places.
# ---------------------------------------------------------------------------
holes = missing_indices(tensor)
out_path = workdir / "imputed.csv"
export_imputed(factors, holes, mapping, out_path)
print(f"\nimputed {len(holes)} missing cells -> {out_path}")
print(out_path.read_text())
