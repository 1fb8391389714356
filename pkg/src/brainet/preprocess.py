"""Cohort table ingestion: CSV parsing, dummy encoding, KNN imputation,
unit conversion, and z-score normalization.

The canonical order is convert_units -> dummy_encode -> knn_impute ->
zscore_normalize (see `preprocess`); categorical gaps are imputed as
indicator means and rounded to {0,1} at 0.5.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError

DEFAULT_MISSING_TOKENS = ("", "NA", "NaN", "null")

COLUMN_KINDS = ("continuous", "categorical", "label", "excluded")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    unit: str | None = None
    unit_scale_to_mg: float | None = None
    indicator: bool = False  # set on dummy columns so imputation can round them

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise ConfigError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if (self.unit is None) != (self.unit_scale_to_mg is None):
            raise ConfigError(f"column {self.name!r}: unit and unit_scale_to_mg must be given together")


@dataclass(frozen=True)
class RawTable:
    columns: tuple[ColumnSchema, ...]
    cells: tuple[tuple, ...]  # row-major; None marks a missing cell
    row_ids: tuple[str, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        if sum(1 for c in self.columns if c.kind == "label") != 1:
            raise DataError("exactly one label column required")
        if len(self.cells) < 1:
            raise DataError("table needs at least one row")
        width = len(self.columns)
        for row in self.cells:
            if len(row) != width:
                raise DataError("table is not rectangular")
        li = self.label_index
        if any(row[li] is None for row in self.cells):
            raise DataError("label column has missing entries")

    @property
    def label_index(self) -> int:
        return next(i for i, c in enumerate(self.columns) if c.kind == "label")

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    def column_values(self, idx: int) -> list:
        return [row[idx] for row in self.cells]


@dataclass(frozen=True)
class Normalization:
    means: tuple[float, ...]
    stds: tuple[float, ...]
    constant_flags: tuple[bool, ...]


@dataclass(frozen=True)
class BiomarkerMatrix:
    feature_names: tuple[str, ...]
    values: np.ndarray  # n x p, finite
    labels: np.ndarray  # n, values in {0, 1}
    normalization: Normalization | None = None

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise DataError("matrix must be n x p with p >= 1")
        if not np.all(np.isfinite(self.values)):
            raise DataError("matrix contains missing or non-finite values")
        if self.labels.shape[0] != self.values.shape[0]:
            raise DataError("label vector length mismatch")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise DataError("labels must be binary 0/1")
        if self.normalization is not None:
            flags = np.array(self.normalization.constant_flags, dtype=bool)
            if flags.shape[0] != self.values.shape[1]:
                raise DataError("normalization record width mismatch")
            means = self.values.mean(axis=0)
            stds = self.values.std(axis=0)
            off = ~flags & ((np.abs(means) > 1e-9) | (np.abs(stds - 1.0) > 1e-9))
            if off.any():
                raise DataError("normalized columns must have mean 0 and std 1 within 1e-9")


def load_schema(path) -> list[ColumnSchema]:
    """Read a schema JSON file: array of {name, kind, unit?, unit_scale_to_mg?}."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ConfigError("schema file must hold a JSON array")
    out = []
    for entry in raw:
        try:
            out.append(
                ColumnSchema(
                    name=entry["name"],
                    kind=entry["kind"],
                    unit=entry.get("unit"),
                    unit_scale_to_mg=entry.get("unit_scale_to_mg"),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"schema entry missing field: {exc}") from exc
    return out


def parse_csv(path, schema, missing_tokens=DEFAULT_MISSING_TOKENS) -> RawTable:
    """Parse a header-bearing CSV against a column schema.

    Cells are typed per schema kind; any token in `missing_tokens` becomes a
    missing cell. Columns with kind 'excluded' are dropped. Row ids are the
    1-based data row numbers.
    """
    missing = set(missing_tokens)
    by_name = {c.name: c for c in schema}
    if len(by_name) != len(schema):
        raise ConfigError("schema has duplicate column names")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file: header row required") from None
        if len(set(header)) != len(header):
            raise DataError("duplicate header")
        if set(header) != set(by_name):
            raise DataError(
                "schema mismatch: header columns "
                f"{sorted(set(header) ^ set(by_name))} do not agree with schema"
            )
        kept = [(pos, by_name[name]) for pos, name in enumerate(header) if by_name[name].kind != "excluded"]
        columns = tuple(col for _, col in kept)
        rows = []
        row_ids = []
        for lineno, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise DataError(f"malformed row width at data row {lineno}")
            out_row = []
            for pos, col in kept:
                token = record[pos]
                if token in missing:
                    if col.kind == "label":
                        raise DataError(f"missing label value at data row {lineno}")
                    out_row.append(None)
                    continue
                if col.kind == "categorical":
                    out_row.append(token)
                    continue
                try:
                    value = float(token)
                except ValueError:
                    raise DataError(
                        f"unparseable numeric cell {token!r} in column {col.name!r} at data row {lineno}"
                    ) from None
                if col.kind == "label":
                    if value not in (0.0, 1.0):
                        raise DataError(f"invalid label {token!r} at data row {lineno}: labels are binary 0/1")
                    value = int(value)
                out_row.append(value)
            rows.append(tuple(out_row))
            row_ids.append(str(lineno))
        if not rows:
            raise DataError("table needs at least one row")
    return RawTable(columns=columns, cells=tuple(rows), row_ids=tuple(row_ids))


def convert_units(table: RawTable) -> RawTable:
    """Scale every unit-tagged continuous column to mg and clear the tags."""
    new_columns = []
    scale_by_index = {}
    for i, col in enumerate(table.columns):
        if col.unit is None:
            new_columns.append(col)
            continue
        if col.unit_scale_to_mg is None or col.unit_scale_to_mg <= 0:
            raise DataError(f"invalid scale for column {col.name!r}")
        scale_by_index[i] = col.unit_scale_to_mg
        new_columns.append(replace(col, unit=None, unit_scale_to_mg=None))
    if not scale_by_index:
        return table
    new_rows = tuple(
        tuple(
            cell if cell is None or i not in scale_by_index else cell * scale_by_index[i]
            for i, cell in enumerate(row)
        )
        for row in table.cells
    )
    return RawTable(columns=tuple(new_columns), cells=new_rows, row_ids=table.row_ids)


def dummy_encode(table: RawTable) -> RawTable:
    """Replace each categorical column by L-1 indicators against a baseline.

    The baseline is the lexicographically smallest observed level; indicator
    columns are named "<column>=<level>". Missing categorical cells stay
    missing in every indicator.
    """
    if not any(c.kind == "categorical" for c in table.columns):
        return table
    new_columns: list[ColumnSchema] = []
    # per output column: (source index, level or None)
    plan: list[tuple[int, str | None]] = []
    for i, col in enumerate(table.columns):
        if col.kind != "categorical":
            new_columns.append(col)
            plan.append((i, None))
            continue
        levels = sorted({row[i] for row in table.cells if row[i] is not None})
        if len(levels) < 2:
            raise DataError(f"degenerate categorical column {col.name!r}: fewer than 2 observed levels")
        for level in levels[1:]:
            new_columns.append(ColumnSchema(name=f"{col.name}={level}", kind="continuous", indicator=True))
            plan.append((i, level))
    new_rows = []
    for row in table.cells:
        out = []
        for src, level in plan:
            if level is None:
                out.append(row[src])
            elif row[src] is None:
                out.append(None)
            else:
                out.append(1.0 if row[src] == level else 0.0)
        new_rows.append(tuple(out))
    return RawTable(columns=tuple(new_columns), cells=tuple(new_rows), row_ids=table.row_ids)


def knn_impute(table: RawTable, k: int = 5) -> RawTable:
    """Fill missing numeric cells from the k nearest complete-enough rows.

    Distance between two rows is the mean squared difference over the
    coordinates both observe (label column excluded); donors for a column are
    rows observing it, ranked by (distance, row index), and the fill value is
    the unweighted mean of the k nearest donors (fewer if fewer exist).
    Indicator columns are rounded to {0,1} at 0.5 after imputation.
    """
    if k < 1:
        raise DataError("knn_impute: k must be >= 1")
    if any(c.kind == "categorical" for c in table.columns):
        raise DataError("knn_impute: dummy-encode categorical columns first")
    label_idx = table.label_index
    feature_idx = [i for i in range(len(table.columns)) if i != label_idx]
    data = np.array(
        [[math.nan if row[i] is None else float(row[i]) for i in feature_idx] for row in table.cells],
        dtype=float,
    )
    observed = ~np.isnan(data)
    n = data.shape[0]
    for j in range(data.shape[1]):
        if not observed[:, j].any():
            raise DataError(f"unimputable column {table.columns[feature_idx[j]].name!r}: no observed values")
    rows_missing = np.where((~observed).any(axis=1))[0]
    if rows_missing.size == 0:
        return table

    filled = data.copy()
    zeroed = np.where(observed, data, 0.0)
    obs_f = observed.astype(float)
    for r in rows_missing:
        # mean squared difference against every other row on shared coords
        diff = zeroed - zeroed[r]
        shared = obs_f * obs_f[r]
        sq = diff * diff * shared
        counts = shared.sum(axis=1)
        with np.errstate(invalid="ignore"):
            dist = np.where(counts > 0, sq.sum(axis=1) / np.maximum(counts, 1), np.inf)
        dist[r] = np.inf
        if not ((counts > 0) & (np.arange(n) != r)).any():
            raise DataError(f"isolated sample: row {table.row_ids[r]!r} shares no observed features")
        for j in np.where(~observed[r])[0]:
            donors = np.where(observed[:, j] & (np.arange(n) != r) & (counts > 0))[0]
            if donors.size == 0:
                raise DataError(
                    f"unimputable column {table.columns[feature_idx[j]].name!r}: no donors for row {table.row_ids[r]!r}"
                )
            order = donors[np.lexsort((donors, dist[donors]))]
            chosen = order[: min(k, order.size)]
            value = float(np.mean(data[chosen, j]))
            if table.columns[feature_idx[j]].indicator:
                value = 1.0 if value >= 0.5 else 0.0
            filled[r, j] = value

    new_rows = []
    for r, row in enumerate(table.cells):
        out = list(row)
        for pos, i in enumerate(feature_idx):
            if out[i] is None:
                out[i] = filled[r, pos]
        new_rows.append(tuple(out))
    return RawTable(columns=table.columns, cells=tuple(new_rows), row_ids=table.row_ids)


def zscore_normalize(table: RawTable) -> BiomarkerMatrix:
    """Standardize every feature column: (x - mean) / std with population std.

    Constant columns map to all zeros and are flagged in the normalization
    record. The table must be complete (run imputation first).
    """
    label_idx = table.label_index
    feature_idx = [i for i in range(len(table.columns)) if i != label_idx]
    if any(row[i] is None for row in table.cells for i in feature_idx):
        raise DataError("zscore_normalize: table has missing cells; impute first")
    names = tuple(table.columns[i].name for i in feature_idx)
    values = np.array([[float(row[i]) for i in feature_idx] for row in table.cells], dtype=float)
    labels = np.array([int(row[label_idx]) for row in table.cells], dtype=int)
    means = values.mean(axis=0)
    stds = values.std(axis=0)  # population std, divide by n
    constant = stds == 0.0
    safe = np.where(constant, 1.0, stds)
    normalized = (values - means) / safe
    normalized[:, constant] = 0.0
    norm = Normalization(
        means=tuple(float(m) for m in means),
        stds=tuple(float(s) for s in stds),
        constant_flags=tuple(bool(c) for c in constant),
    )
    return BiomarkerMatrix(feature_names=names, values=normalized, labels=labels, normalization=norm)


def preprocess(table: RawTable, k: int = 5) -> BiomarkerMatrix:
    """Full cleaning pipeline: convert units, encode, impute, normalize."""
    return zscore_normalize(knn_impute(dummy_encode(convert_units(table)), k=k))


def save_matrix(matrix: BiomarkerMatrix, csv_path, sidecar_path) -> None:
    """Write the normalized matrix as CSV plus a JSON sidecar {means, stds, flags}."""
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(matrix.feature_names) + ["label"])
        for row, label in zip(matrix.values, matrix.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
    norm = matrix.normalization
    sidecar = {
        "feature_names": list(matrix.feature_names),
        "means": list(norm.means) if norm else None,
        "stds": list(norm.stds) if norm else None,
        "flags": list(norm.constant_flags) if norm else None,
    }
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_matrix(csv_path, sidecar_path=None) -> BiomarkerMatrix:
    """Read a matrix written by save_matrix."""
    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-1] != "label":
            raise DataError("matrix CSV must end with a 'label' column")
        names = tuple(header[:-1])
        rows = []
        labels = []
        for record in reader:
            rows.append([float(v) for v in record[:-1]])
            labels.append(int(record[-1]))
    norm = None
    if sidecar_path is not None:
        with open(sidecar_path, "r", encoding="utf-8") as fh:
            side = json.load(fh)
        if side.get("means") is not None:
            norm = Normalization(
                means=tuple(side["means"]),
                stds=tuple(side["stds"]),
                constant_flags=tuple(side["flags"]),
            )
    return BiomarkerMatrix(
        feature_names=names,
        values=np.array(rows, dtype=float),
        labels=np.array(labels, dtype=int),
        normalization=norm,
    )
