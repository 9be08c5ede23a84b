"""Encounter table ingestion, message catalog, and dataset fingerprinting.

The encounter table is the single experimental dataset all layers read:
one row per patient notification with the assigned message variant and
the downstream outcome flags. It is immutable after ingest, so concurrent
readers need no coordination.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .canonical import canonical_bytes, digest_stream


class DatasetError(ValueError):
    """Base class for ingestion and catalog failures."""


class MissingColumn(DatasetError):
    def __init__(self, column: str):
        super().__init__(f"required column missing: {column}")
        self.column = column


class DuplicateHeaderName(DatasetError):
    def __init__(self, column: str):
        super().__init__(f"duplicate header name after rename: {column}")
        self.column = column


class TypeCoercionFailure(DatasetError):
    def __init__(self, row: int, column: str, value: str, expected: str):
        super().__init__(
            f"row {row}, column {column}: cannot coerce {value!r} to {expected}"
        )
        self.row = row
        self.column = column
        self.value = value


class DuplicateName(DatasetError):
    def __init__(self, name: str):
        super().__init__(f"duplicate catalog entry name: {name}")
        self.name = name


class EmptyText(DatasetError):
    def __init__(self, name: str):
        super().__init__(f"catalog entry {name!r} has empty text")
        self.name = name


class ColumnType(str, Enum):
    BOOL = "bool"
    INT = "int"
    FLOAT = "float"
    CATEGORICAL = "categorical"
    DATE = "date"
    TEXT = "text"


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    type: ColumnType
    nullable: bool


REQUIRED_COLUMNS: tuple[ColumnSpec, ...] = (
    ColumnSpec("patient_id", ColumnType.TEXT, nullable=False),
    ColumnSpec("variant", ColumnType.CATEGORICAL, nullable=False),
    ColumnSpec("clicked", ColumnType.BOOL, nullable=False),
    ColumnSpec("authenticated", ColumnType.BOOL, nullable=False),
    ColumnSpec("opted_out", ColumnType.BOOL, nullable=False),
    ColumnSpec("redeemed", ColumnType.BOOL, nullable=False),
    ColumnSpec("age", ColumnType.INT, nullable=True),
    ColumnSpec("gender", ColumnType.CATEGORICAL, nullable=True),
    ColumnSpec("state", ColumnType.CATEGORICAL, nullable=True),
    ColumnSpec("drug_category", ColumnType.CATEGORICAL, nullable=True),
    ColumnSpec("sent_at", ColumnType.DATE, nullable=True),
)

_TRUE_TOKENS = frozenset({"1", "true", "yes", "y", "t"})
_FALSE_TOKENS = frozenset({"0", "false", "no", "n", "f"})


@dataclass(frozen=True)
class DatasetFingerprint:
    digest: str
    row_count: int
    column_names: tuple[str, ...]


class EncounterTable:
    """Column-oriented immutable table; null cells are stored as None."""

    def __init__(self, columns: Mapping[str, Sequence[Any]], schema: Sequence[ColumnSpec]):
        self._columns = {name: list(values) for name, values in columns.items()}
        self.schema = tuple(schema)
        lengths = {len(v) for v in self._columns.values()}
        if len(lengths) > 1:
            raise DatasetError(f"ragged columns: lengths {sorted(lengths)}")
        self.row_count = lengths.pop() if lengths else 0

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(spec.name for spec in self.schema)

    def column(self, name: str) -> list[Any]:
        if name not in self._columns:
            raise MissingColumn(name)
        return self._columns[name]

    def has_column(self, name: str) -> bool:
        return name in self._columns

    def distinct(self, name: str) -> list[Any]:
        seen: dict[Any, None] = {}
        for value in self.column(name):
            if value is not None and value not in seen:
                seen[value] = None
        return sorted(seen)

    def row(self, index: int) -> dict[str, Any]:
        return {name: self._columns[name][index] for name in self.column_names}

    def to_csv(self, path: str | Path) -> None:
        """Round-trippable CSV: bools as true/false, nulls as empty cells."""
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(self.column_names)
            for i in range(self.row_count):
                row = []
                for name in self.column_names:
                    value = self._columns[name][i]
                    if value is None:
                        row.append("")
                    elif value is True:
                        row.append("true")
                    elif value is False:
                        row.append("false")
                    else:
                        row.append(str(value))
                writer.writerow(row)


def _coerce(raw: str, spec: ColumnSpec, row: int, date_format: str) -> Any:
    """One cell. Nullable columns turn unparseable cells into null."""
    text = raw.strip()
    if text == "":
        if spec.nullable:
            return None
        raise TypeCoercionFailure(row, spec.name, raw, spec.type.value)
    try:
        if spec.type is ColumnType.BOOL:
            token = text.lower()
            if token in _TRUE_TOKENS:
                return True
            if token in _FALSE_TOKENS:
                return False
            raise ValueError(token)
        if spec.type is ColumnType.INT:
            return int(text)
        if spec.type is ColumnType.FLOAT:
            return float(text)
        if spec.type is ColumnType.DATE:
            return datetime.strptime(text, date_format).date().isoformat()
        return text  # categorical and text pass through
    except ValueError:
        if spec.nullable:
            return None
        raise TypeCoercionFailure(row, spec.name, raw, spec.type.value) from None


def ingest(
    csv_path: str | Path,
    descriptor: Mapping[str, Any] | str | Path | None = None,
) -> EncounterTable:
    """Load a CSV export into a typed EncounterTable.

    The descriptor is a JSON object (or a path to one) with optional keys:
    rename (source header -> canonical column name) and date_format
    (strptime pattern for date columns, default ISO %Y-%m-%d).
    """
    if isinstance(descriptor, (str, Path)):
        descriptor = json.loads(Path(descriptor).read_text(encoding="utf-8"))
    descriptor = descriptor or {}
    rename: Mapping[str, str] = descriptor.get("rename", {})
    date_format: str = descriptor.get("date_format", "%Y-%m-%d")

    with open(csv_path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            raw_header = next(reader)
        except StopIteration:
            raise DatasetError("empty file: no header row") from None
        header = [rename.get(name, name) for name in raw_header]
        seen: set[str] = set()
        for name in header:
            if name in seen:
                raise DuplicateHeaderName(name)
            seen.add(name)
        required = {spec.name: spec for spec in REQUIRED_COLUMNS}
        for name in required:
            if name not in seen:
                raise MissingColumn(name)
        # Columns beyond the required schema are kept as nullable text.
        schema = list(REQUIRED_COLUMNS) + [
            ColumnSpec(name, ColumnType.TEXT, nullable=True)
            for name in header
            if name not in required
        ]
        spec_by_name = {spec.name: spec for spec in schema}
        columns: dict[str, list[Any]] = {spec.name: [] for spec in schema}
        for row_index, row in enumerate(reader):
            if len(row) != len(header):
                raise DatasetError(
                    f"row {row_index}: expected {len(header)} cells, got {len(row)}"
                )
            for name, raw in zip(header, row):
                columns[name].append(_coerce(raw, spec_by_name[name], row_index, date_format))
    return EncounterTable(columns, schema)


def fingerprint(table: EncounterTable) -> DatasetFingerprint:
    """Order-sensitive content digest over the canonical row serialization.

    Hashes the ordered column-name list, then each row as the canonical
    JSON of its cell list in schema order. Any single-cell change changes
    the digest.
    """
    hasher = digest_stream()
    names = list(table.column_names)
    hasher.update(canonical_bytes(names))
    column_data = [table.column(name) for name in names]
    for i in range(table.row_count):
        hasher.update(canonical_bytes([col[i] for col in column_data]))
    return DatasetFingerprint(
        digest=hasher.hexdigest(),
        row_count=table.row_count,
        column_names=tuple(names),
    )


# ---------------------------------------------------------------------------
# Message catalog
# ---------------------------------------------------------------------------


class StrategyTag(str, Enum):
    AUTHORITY = "authority"
    URGENCY = "urgency"
    SOCIAL_PROOF = "social_proof"
    GAIN_FRAMING = "gain_framing"
    TASK_COMPLETION = "task_completion"
    EFFICIENCY = "efficiency"
    PERSONALIZATION = "personalization"
    RECIPROCITY = "reciprocity"
    CLARITY = "clarity"
    IDENTITY = "identity"
    EMOTION = "emotion"
    PROGRESS = "progress"
    FUTURE_SELF = "future_self"
    COMMITMENT = "commitment"
    DEFAULT = "default"


class Generation(str, Enum):
    BASELINE = "baseline"
    EXPLOITATION = "exploitation"
    EXPLORATION = "exploration"
    LAST_ROUND = "last_round"


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    text: str
    char_count: int  # recomputed Unicode scalar count, authoritative
    printed_char_count: int | None  # as printed in the source table, informational
    strategy_tags: frozenset[StrategyTag]
    generation: Generation
    rejected_by_review: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "text": self.text,
            "char_count": self.char_count,
            "printed_char_count": self.printed_char_count,
            "strategy_tags": sorted(t.value for t in self.strategy_tags),
            "generation": self.generation.value,
            "rejected_by_review": self.rejected_by_review,
        }


@dataclass(frozen=True)
class MessageCatalog:
    entries: tuple[CatalogEntry, ...]

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def get(self, name: str) -> CatalogEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def with_tag(self, tag: StrategyTag) -> list[CatalogEntry]:
        return [e for e in self.entries if tag in e.strategy_tags]

    def tag_combinations(self) -> set[frozenset[StrategyTag]]:
        return {e.strategy_tags for e in self.entries}

    def count_mismatches(self) -> list[dict[str, Any]]:
        """Entries whose printed count differs from the recomputed one."""
        return [
            {"name": e.name, "char_count": e.char_count, "printed_char_count": e.printed_char_count}
            for e in self.entries
            if e.printed_char_count is not None and e.printed_char_count != e.char_count
        ]


def load_catalog(source: str | Path | Sequence[Mapping[str, Any]]) -> MessageCatalog:
    """Parse a catalog from a JSON list of entries (or the parsed list).

    char_count is always recomputed from the text; any printed count in the
    file is retained separately and never trusted for checks.
    """
    if isinstance(source, (str, Path)):
        raw = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        raw = source
    entries: list[CatalogEntry] = []
    seen: set[str] = set()
    for item in raw:
        name = item["name"]
        if name in seen:
            raise DuplicateName(name)
        seen.add(name)
        text = item.get("text", "")
        if not text:
            raise EmptyText(name)
        printed_count = item.get("printed_char_count")
        entries.append(
            CatalogEntry(
                name=name,
                text=text,
                char_count=len(text),
                printed_char_count=None if printed_count is None else int(printed_count),
                strategy_tags=frozenset(StrategyTag(t.lower()) for t in item.get("strategy_tags", ())),
                generation=Generation(str(item.get("generation", "baseline")).lower()),
                rejected_by_review=bool(item.get("rejected_by_review", False)),
            )
        )
    return MessageCatalog(entries=tuple(entries))


def builtin_catalog(stage: str) -> MessageCatalog:
    """Shipped catalogs: 'stage1' (13 entries) or 'stage2' (23 entries)."""
    ref = resources.files("dikwflow").joinpath("catalogs", f"{stage}.json")
    return load_catalog(json.loads(ref.read_text(encoding="utf-8")))


def unknown_variants(table: EncounterTable, catalog: MessageCatalog) -> list[str]:
    """Variant values in the table that the catalog does not define."""
    names = set(catalog.names())
    return [v for v in table.distinct("variant") if v not in names]
