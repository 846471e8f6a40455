"""Declarative feature schema: which columns to keep and how to encode them.

A schema file is JSON with a ``target`` block and a ``features`` list. Each
feature entry uses the keys ``name``, ``kind``, ``levels``, ``consolidate``
and ``drop_reason``:

* ``kind: "numeric"`` - passed through as a float column.
* ``kind: "ordinal"`` - ``levels`` maps level name to an integer code.
* ``kind: "nominal"`` - ``levels`` lists the (consolidated) level names that
  become one-hot columns.
* ``kind: "drop"`` - column is ignored; ``drop_reason`` says why.

``consolidate`` optionally maps raw levels onto declared levels before
encoding. Values outside the declared levels with no consolidation rule are
an error, never silently bucketed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError

SCHEMA_FORMAT = "attralign-schema"
SCHEMA_VERSION = 1

KINDS = ("numeric", "ordinal", "nominal", "drop")


@dataclass(frozen=True)
class SchemaEntry:
    name: str
    kind: str
    levels: dict[str, int] | list[str] | None = None
    consolidate: dict[str, str] | None = None
    drop_reason: str | None = None


@dataclass(frozen=True)
class TargetSpec:
    name: str
    positive: str
    negative: str


@dataclass(frozen=True)
class FeatureSchema:
    entries: list[SchemaEntry]
    target: TargetSpec

    def __post_init__(self) -> None:
        validate_schema(self)

    @property
    def feature_entries(self) -> list[SchemaEntry]:
        """Non-drop entries, in declaration order."""
        return [e for e in self.entries if e.kind != "drop"]

    @property
    def feature_names(self) -> list[str]:
        return [e.name for e in self.feature_entries]

    def entry(self, name: str) -> SchemaEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def validate_schema(schema: FeatureSchema) -> None:
    names = [e.name for e in schema.entries]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise SchemaError(f"duplicate feature names: {dupes}")
    if not schema.feature_entries:
        raise SchemaError("schema declares no non-drop features")
    if schema.target.positive == schema.target.negative:
        raise SchemaError("target positive and negative labels are identical")

    for e in schema.entries:
        if e.kind not in KINDS:
            raise SchemaError(f"{e.name}: unknown kind {e.kind!r}")
        if e.kind == "ordinal":
            if not isinstance(e.levels, dict) or not e.levels:
                raise SchemaError(f"{e.name}: ordinal entry needs a level->code map")
            codes = list(e.levels.values())
            if len(set(codes)) != len(codes):
                raise SchemaError(f"{e.name}: ordinal level map is not injective")
            declared = set(e.levels)
        elif e.kind == "nominal":
            if not isinstance(e.levels, list) or len(e.levels) < 2:
                raise SchemaError(f"{e.name}: nominal entry needs >= 2 levels")
            if len(set(e.levels)) != len(e.levels):
                raise SchemaError(f"{e.name}: duplicate nominal levels")
            declared = set(e.levels)
        else:
            if e.consolidate:
                raise SchemaError(f"{e.name}: consolidation only applies to categoricals")
            continue
        for raw, target in (e.consolidate or {}).items():
            if target not in declared:
                raise SchemaError(
                    f"{e.name}: consolidation target {target!r} is not a declared level"
                )


def load_schema(path: str | Path) -> FeatureSchema:
    """Parse and validate a schema file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return schema_from_dict(doc, where=str(path))


def schema_from_dict(doc: dict, where: str = "<dict>") -> FeatureSchema:
    if doc.get("format") != SCHEMA_FORMAT:
        raise SchemaError(f"{where}: missing or wrong format marker")
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"{where}: unsupported schema version {doc.get('version')!r}")
    try:
        target = TargetSpec(**doc["target"])
        entries = [
            SchemaEntry(
                name=f["name"],
                kind=f["kind"],
                levels=f.get("levels"),
                consolidate=f.get("consolidate"),
                drop_reason=f.get("drop_reason"),
            )
            for f in doc["features"]
        ]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{where}: malformed schema document: {exc}") from exc
    return FeatureSchema(entries=entries, target=target)


def schema_to_dict(schema: FeatureSchema) -> dict:
    features = []
    for e in schema.entries:
        entry: dict = {"name": e.name, "kind": e.kind}
        if e.levels is not None:
            entry["levels"] = e.levels
        if e.consolidate:
            entry["consolidate"] = e.consolidate
        if e.drop_reason:
            entry["drop_reason"] = e.drop_reason
        features.append(entry)
    return {
        "format": SCHEMA_FORMAT,
        "version": SCHEMA_VERSION,
        "target": {
            "name": schema.target.name,
            "positive": schema.target.positive,
            "negative": schema.target.negative,
        },
        "features": features,
    }


def save_schema(schema: FeatureSchema, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(schema_to_dict(schema), indent=2) + "\n", encoding="utf-8"
    )


def bundled_schema_path(name: str) -> Path:
    """Path of a schema shipped with the package (``synthetic``, ``lendingclub_2007_2011``)."""
    p = Path(__file__).parent / "schemas" / f"{name}.json"
    if not p.exists():
        raise FileNotFoundError(f"no bundled schema named {name!r}")
    return p
