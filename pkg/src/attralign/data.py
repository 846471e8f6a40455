"""Tabular ingestion, schema-driven encoding, and stratified splitting.

The pipeline is: ``load_table`` -> ``drop_degenerate`` -> ``apply_schema``
-> ``stratified_split`` -> ``impute_missing``. Imputation runs last because
medians must come from the training split only.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateDatasetError,
    EmptyTableError,
    RaggedRowsError,
    SchemaError,
    SplitError,
    TargetError,
    UnknownLevelError,
)
from .schema import FeatureSchema, load_schema, save_schema

DATASET_FORMAT_VERSION = 1

# Only the empty string marks a missing cell; tokens like "n/a" may be
# legitimate categorical levels.
MISSING = ""


def parse_float(value: str) -> float:
    """Parse a numeric cell, tolerating '%'/'$' decorations and ',' separators.

    A trailing '%' is stripped, not divided by 100: "10.65%" -> 10.65.
    """
    v = value.strip()
    if v.endswith("%"):
        v = v[:-1]
    if v.startswith("$"):
        v = v[1:]
    return float(v.replace(",", ""))


@dataclass
class RawTable:
    """Column-major table of raw strings; ``None`` marks a missing cell."""

    names: list[str]
    columns: dict[str, list[str | None]]

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def n_cols(self) -> int:
        return len(self.names)

    def is_numeric(self, name: str) -> bool:
        """True when every non-missing value parses as a float (and one exists)."""
        col = self.columns[name]
        seen = False
        for v in col:
            if v is None:
                continue
            seen = True
            try:
                parse_float(v)
            except ValueError:
                return False
        return seen

    def numeric_values(self, name: str) -> np.ndarray:
        """Float view of a column, NaN where missing."""
        col = self.columns[name]
        return np.array([np.nan if v is None else parse_float(v) for v in col])


def load_table(path: str | Path, format: str = "csv") -> RawTable:
    """Read a UTF-8 CSV with a header row into a :class:`RawTable`."""
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyTableError(f"{path}: no header row") from None
        columns: dict[str, list[str | None]] = {name: [] for name in header}
        if len(columns) != len(header):
            raise RaggedRowsError(f"{path}: duplicate column names in header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise RaggedRowsError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            for name, value in zip(header, row):
                columns[name].append(None if value == MISSING else value)
    table = RawTable(names=header, columns=columns)
    if table.n_rows == 0:
        raise EmptyTableError(f"{path}: header but no data rows")
    return table


@dataclass(frozen=True)
class DropReport:
    dropped: list[tuple[str, str]]  # (column, reason)

    def reasons(self) -> dict[str, str]:
        return dict(self.dropped)


def drop_degenerate(raw: RawTable) -> tuple[RawTable, DropReport]:
    """Remove all-missing and zero-variance columns.

    Numeric columns compare as parsed values, so "5" and "5.0" count as one.
    """
    dropped: list[tuple[str, str]] = []
    kept: list[str] = []
    for name in raw.names:
        values = [v for v in raw.columns[name] if v is not None]
        if not values:
            dropped.append((name, "all_missing"))
            continue
        if raw.is_numeric(name):
            distinct = {parse_float(v) for v in values}
        else:
            distinct = set(values)
        if len(distinct) == 1:
            dropped.append((name, "zero_variance"))
        else:
            kept.append(name)
    if not kept:
        raise DegenerateDatasetError("every column is all-missing or constant")
    table = RawTable(names=kept, columns={n: raw.columns[n] for n in kept})
    return table, DropReport(dropped=dropped)


@dataclass
class EncodedDataset:
    """Design matrix plus the bookkeeping to map encoded columns back to features."""

    matrix: np.ndarray  # (n, m_enc) float64
    labels: np.ndarray  # (n,) int8 in {0, 1}
    encoded_names: list[str]
    group_index: dict[str, list[int]]  # original feature -> encoded column indices
    original_names: list[str]

    @property
    def n_rows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def n_encoded(self) -> int:
        return int(self.matrix.shape[1])

    def check_group_partition(self) -> None:
        seen: list[int] = []
        for cols in self.group_index.values():
            seen.extend(cols)
        if sorted(seen) != list(range(self.n_encoded)):
            raise ValueError("group_index is not a partition of the encoded columns")


def _consolidated(entry, value: str | None) -> str | None:
    # A consolidation rule keyed by "" routes missing cells to a declared
    # level; anything else missing stays missing and fails closed.
    if value is None:
        if entry.consolidate and MISSING in entry.consolidate:
            return entry.consolidate[MISSING]
        return None
    if entry.consolidate and value in entry.consolidate:
        return entry.consolidate[value]
    return value


def apply_schema(raw: RawTable, schema: FeatureSchema) -> EncodedDataset:
    """Encode a cleaned table per the schema.

    Ordinals become declared integer codes, nominals one-hot columns after
    consolidation, numerics pass through (missing stays NaN for downstream
    imputation). Unknown categorical levels fail closed.
    """
    target = schema.target
    if target.name not in raw.columns:
        raise TargetError(f"target column {target.name!r} not present")
    label_col = raw.columns[target.name]
    labels = np.empty(raw.n_rows, dtype=np.int8)
    for i, v in enumerate(label_col):
        if v == target.positive:
            labels[i] = 1
        elif v == target.negative:
            labels[i] = 0
        else:
            raise TargetError(
                f"row {i}: target value {v!r} is neither "
                f"{target.positive!r} nor {target.negative!r}; filter rows upstream"
            )

    for entry in schema.feature_entries:
        if entry.name not in raw.columns:
            raise SchemaError(f"schema feature {entry.name!r} not present in table")

    columns: list[np.ndarray] = []
    encoded_names: list[str] = []
    group_index: dict[str, list[int]] = {}
    for entry in schema.feature_entries:
        start = len(encoded_names)
        if entry.kind == "numeric":
            columns.append(raw.numeric_values(entry.name))
            encoded_names.append(entry.name)
        elif entry.kind == "ordinal":
            col = np.empty(raw.n_rows)
            for i, v in enumerate(raw.columns[entry.name]):
                level = _consolidated(entry, v)
                if level is None or level not in entry.levels:
                    raise UnknownLevelError(f"{entry.name}: unseen level {v!r} at row {i}")
                col[i] = entry.levels[level]
            columns.append(col)
            encoded_names.append(entry.name)
        else:  # nominal
            levels = list(entry.levels)
            block = np.zeros((raw.n_rows, len(levels)))
            index = {lv: j for j, lv in enumerate(levels)}
            for i, v in enumerate(raw.columns[entry.name]):
                level = _consolidated(entry, v)
                if level is None or level not in index:
                    raise UnknownLevelError(f"{entry.name}: unseen level {v!r} at row {i}")
                block[i, index[level]] = 1.0
            for j, lv in enumerate(levels):
                columns.append(block[:, j])
                encoded_names.append(f"{entry.name}={lv}")
        group_index[entry.name] = list(range(start, len(encoded_names)))

    matrix = np.column_stack(columns)
    ds = EncodedDataset(
        matrix=matrix,
        labels=labels,
        encoded_names=encoded_names,
        group_index=group_index,
        original_names=schema.feature_names,
    )
    ds.check_group_partition()
    if labels.min() == labels.max():
        raise TargetError("labels contain a single class")
    return ds


@dataclass(frozen=True)
class SplitIndices:
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    ratio: float


def stratified_split(ds: EncodedDataset, ratio: float, seed: int) -> SplitIndices:
    """Deterministic stratified train/test split by label."""
    if not 0.0 < ratio < 1.0:
        raise SplitError(f"ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for cls in (0, 1):
        idx = np.flatnonzero(ds.labels == cls)
        if idx.size < 2:
            raise SplitError(f"class {cls} has {idx.size} rows, need >= 2")
        perm = rng.permutation(idx)
        n_train = int(round(ratio * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1)  # both splits see both classes
        train_parts.append(perm[:n_train])
        test_parts.append(perm[n_train:])
    return SplitIndices(
        train_idx=np.sort(np.concatenate(train_parts)),
        test_idx=np.sort(np.concatenate(test_parts)),
        seed=seed,
        ratio=ratio,
    )


def impute_missing(ds: EncodedDataset, train_idx: np.ndarray) -> dict[str, float]:
    """Fill numeric NaNs in place with the training-split median per column.

    Returns the medians used, keyed by encoded column name.
    """
    medians: dict[str, float] = {}
    for j, name in enumerate(ds.encoded_names):
        col = ds.matrix[:, j]
        mask = np.isnan(col)
        if not mask.any():
            continue
        train_vals = col[train_idx]
        train_vals = train_vals[~np.isnan(train_vals)]
        if train_vals.size == 0:
            raise DegenerateDatasetError(f"{name}: no observed training values to impute from")
        med = float(np.median(train_vals))
        col[mask] = med
        medians[name] = med
    return medians


def decode_instance(ds: EncodedDataset, schema: FeatureSchema, row: int) -> dict[str, object]:
    """Human-readable values for one row, keyed by original feature name.

    Numerics come back as floats (post-imputation, i.e. what the model saw),
    ordinals and nominals as their (consolidated) level names.
    """
    out: dict[str, object] = {}
    x = ds.matrix[row]
    for entry in schema.feature_entries:
        cols = ds.group_index[entry.name]
        if entry.kind == "numeric":
            out[entry.name] = float(x[cols[0]])
        elif entry.kind == "ordinal":
            code = int(round(x[cols[0]]))
            inverse = {v: k for k, v in entry.levels.items()}
            out[entry.name] = inverse[code]
        else:
            levels = list(entry.levels)
            hot = [j for j, c in enumerate(cols) if x[c] == 1.0]
            if len(hot) != 1:
                raise ValueError(f"{entry.name}: row {row} one-hot group is not exactly-one")
            out[entry.name] = levels[hot[0]]
    return out


def save_dataset(
    ds: EncodedDataset,
    schema: FeatureSchema,
    out_dir: str | Path,
    split: SplitIndices | None = None,
    prep_report: dict | None = None,
) -> None:
    """Persist an encoded dataset as a documented directory of text files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        out / "matrix.csv",
        ds.matrix,
        delimiter=",",
        fmt="%.17g",
        header=",".join(ds.encoded_names),
        comments="",
    )
    np.savetxt(out / "labels.csv", ds.labels, fmt="%d", header="label", comments="")
    save_schema(schema, out / "schema.json")
    (out / "groups.json").write_text(
        json.dumps(
            {
                "format_version": DATASET_FORMAT_VERSION,
                "original_names": ds.original_names,
                "group_index": ds.group_index,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    if split is not None:
        (out / "split.json").write_text(
            json.dumps(
                {
                    "seed": split.seed,
                    "ratio": split.ratio,
                    "train_idx": split.train_idx.tolist(),
                    "test_idx": split.test_idx.tolist(),
                },
                indent=None,
            )
            + "\n",
            encoding="utf-8",
        )
    if prep_report is not None:
        (out / "prep_report.json").write_text(
            json.dumps(prep_report, indent=2) + "\n", encoding="utf-8"
        )


def load_dataset(data_dir: str | Path) -> tuple[EncodedDataset, FeatureSchema, SplitIndices | None]:
    data = Path(data_dir)
    schema = load_schema(data / "schema.json")
    groups = json.loads((data / "groups.json").read_text(encoding="utf-8"))
    if groups.get("format_version") != DATASET_FORMAT_VERSION:
        raise ValueError(f"{data}: unsupported dataset format version")
    matrix = np.loadtxt(data / "matrix.csv", delimiter=",", skiprows=1, ndmin=2)
    labels = np.loadtxt(data / "labels.csv", skiprows=1, dtype=np.int8, ndmin=1)
    with (data / "matrix.csv").open(encoding="utf-8") as fh:
        encoded_names = fh.readline().strip().split(",")
    ds = EncodedDataset(
        matrix=matrix,
        labels=labels,
        encoded_names=encoded_names,
        group_index={k: list(v) for k, v in groups["group_index"].items()},
        original_names=list(groups["original_names"]),
    )
    split: SplitIndices | None = None
    split_path = data / "split.json"
    if split_path.exists():
        doc = json.loads(split_path.read_text(encoding="utf-8"))
        split = SplitIndices(
            train_idx=np.asarray(doc["train_idx"], dtype=np.int64),
            test_idx=np.asarray(doc["test_idx"], dtype=np.int64),
            seed=doc["seed"],
            ratio=doc["ratio"],
        )
    return ds, schema, split


def prepare(
    csv_path: str | Path,
    schema_path: str | Path,
    ratio: float = 0.7,
    seed: int = 0,
    filter_target: bool = False,
) -> tuple[EncodedDataset, FeatureSchema, SplitIndices, dict]:
    """Run the whole pipeline; returns dataset, schema, split and a prep report."""
    schema = load_schema(schema_path)
    raw = load_table(csv_path)
    n_loaded = raw.n_rows
    n_filtered = 0
    if filter_target:
        raw, n_filtered = _filter_target_rows(raw, schema)
    raw, drops = drop_degenerate(raw)
    ds = apply_schema(raw, schema)
    split = stratified_split(ds, ratio=ratio, seed=seed)
    medians = impute_missing(ds, split.train_idx)
    report = {
        "rows_loaded": n_loaded,
        "rows_filtered_by_target": n_filtered,
        "dropped_columns": drops.dropped,
        "imputed_medians": medians,
        "split": {"ratio": ratio, "seed": seed,
                  "n_train": int(split.train_idx.size), "n_test": int(split.test_idx.size)},
    }
    return ds, schema, split, report


def _filter_target_rows(raw: RawTable, schema: FeatureSchema) -> tuple[RawTable, int]:
    target = schema.target
    if target.name not in raw.columns:
        raise TargetError(f"target column {target.name!r} not present")
    keep = [
        i
        for i, v in enumerate(raw.columns[target.name])
        if v in (target.positive, target.negative)
    ]
    removed = raw.n_rows - len(keep)
    if removed == 0:
        return raw, 0
    columns = {n: [raw.columns[n][i] for i in keep] for n in raw.names}
    return RawTable(names=raw.names, columns=columns), removed
