"""Data-layer topic resolution: validation and metadata without interpretation.

Every resolver here counts, checks, and documents. None of them compare
outcomes across variants or compute statistics; that boundary is enforced
structurally by the payload schema (see FORBIDDEN_PAYLOAD_FIELDS and the
tests that grep resolved payloads for them).
"""

from __future__ import annotations

from collections import Counter
from typing import Any

from .artifacts import DataKind, DataTopic, Layer
from .dataset import EncounterTable, MessageCatalog, unknown_variants

DEFAULT_SMS_LIMIT = 160
DEFAULT_BALANCE_TOLERANCE = 0.05

# Fields that must never appear in a data-layer payload: their presence
# would mean the agent crossed into statistical interpretation.
FORBIDDEN_PAYLOAD_FIELDS = frozenset(
    {"p_value", "effect", "effect_size", "lift", "ci_low", "ci_high", "test_statistic"}
)


class UnsupportedKind(ValueError):
    def __init__(self, kind: str):
        super().__init__(f"no data-layer resolver for kind {kind!r}")
        self.kind = kind


class EmptyTable(ValueError):
    def __init__(self) -> None:
        super().__init__("table has no rows")


def check_missingness(table: EncounterTable, columns: list[str] | None = None) -> dict[str, Any]:
    """Per-column null accounting plus the row indices of each null."""
    names = columns or list(table.column_names)
    per_column: dict[str, Any] = {}
    null_rows: dict[str, list[int]] = {}
    for name in names:
        values = table.column(name)
        rows = [i for i, v in enumerate(values) if v is None]
        per_column[name] = {
            "null_count": len(rows),
            "null_fraction": len(rows) / table.row_count if table.row_count else 0.0,
        }
        if rows:
            null_rows[name] = rows
    return {"columns": per_column, "null_rows": null_rows}


def check_randomization_balance(
    table: EncounterTable, tolerance: float = DEFAULT_BALANCE_TOLERANCE
) -> dict[str, Any]:
    """Assignment shares per variant; passes iff all within tolerance of uniform."""
    if table.row_count == 0:
        raise EmptyTable()
    counts = Counter(table.column("variant"))
    total = sum(counts.values())
    shares = {variant: n / total for variant, n in sorted(counts.items())}
    uniform = 1.0 / len(counts)
    passed = all(abs(share - uniform) <= tolerance for share in shares.values())
    return {
        "shares": shares,
        "uniform_share": uniform,
        "tolerance": tolerance,
        "passed": passed,
    }


def _schema_verification(table: EncounterTable, catalog: MessageCatalog) -> dict[str, Any]:
    violations: list[str] = []
    for spec in table.schema:
        if not spec.nullable:
            nulls = sum(1 for v in table.column(spec.name) if v is None)
            if nulls:
                violations.append(f"non-nullable column {spec.name} has {nulls} nulls")
    for variant in unknown_variants(table, catalog):
        violations.append(f"variant {variant!r} not in catalog")
    return {
        "columns": [
            {"name": s.name, "type": s.type.value, "nullable": s.nullable} for s in table.schema
        ],
        "row_count": table.row_count,
        "violations": violations,
    }


def _experiment_dimensioning(table: EncounterTable) -> dict[str, Any]:
    counts = Counter(table.column("variant"))
    return {
        "rows": table.row_count,
        "variants": len(counts),
        "per_variant_counts": dict(sorted(counts.items())),
    }


def _id_uniqueness(table: EncounterTable, id_column: str) -> dict[str, Any]:
    positions: dict[Any, list[int]] = {}
    for i, value in enumerate(table.column(id_column)):
        positions.setdefault(value, []).append(i)
    duplicates = {str(v): rows for v, rows in sorted(positions.items()) if len(rows) > 1}
    return {"id_column": id_column, "duplicates": duplicates}


def _format_compliance(catalog: MessageCatalog, limit: int) -> dict[str, Any]:
    over = [
        {"name": e.name, "char_count": e.char_count}
        for e in catalog.entries
        if e.char_count > limit
    ]
    return {
        "limit": limit,
        "max_char_count": max(e.char_count for e in catalog.entries),
        "over_limit": over,
        "count_mismatches": catalog.count_mismatches(),
    }


def _provenance_record(table: EncounterTable, params: dict[str, Any]) -> dict[str, Any]:
    return {
        "source": params.get("source", "unspecified"),
        "collected_by": params.get("collected_by", "unspecified"),
        "notes": params.get("notes", ""),
        "row_count": table.row_count,
        "columns": list(table.column_names),
    }


def _experiment_config(table: EncounterTable, tolerance: float) -> dict[str, Any]:
    return {"balance": check_randomization_balance(table, tolerance)}


def resolve_data_topic(
    table: EncounterTable, catalog: MessageCatalog, topic: DataTopic
) -> tuple[dict[str, Any], str]:
    """Resolve one data topic to (payload, report). Deterministic.

    The payload carries layer, kind, findings, and a passed flag; the
    report is plain text with one finding per line.
    """
    topic.validate()
    params = topic.params_dict
    kind = topic.kind
    if kind is DataKind.SCHEMA_VERIFICATION:
        findings = _schema_verification(table, catalog)
        passed = not findings["violations"]
        lines = [f"schema: {len(findings['columns'])} columns, {findings['row_count']} rows"]
        lines += [f"violation: {v}" for v in findings["violations"]]
    elif kind is DataKind.MISSING_VALUE_MAP:
        findings = check_missingness(table, params.get("columns"))
        passed = True  # missingness is documented, not judged
        lines = [
            f"{name}: {stats['null_count']} nulls ({stats['null_fraction']:.4f})"
            for name, stats in findings["columns"].items()
        ]
    elif kind is DataKind.EXPERIMENT_DIMENSIONING:
        findings = _experiment_dimensioning(table)
        passed = True
        lines = [f"rows: {findings['rows']}", f"variants: {findings['variants']}"]
        lines += [f"{v}: {n}" for v, n in findings["per_variant_counts"].items()]
    elif kind is DataKind.ID_UNIQUENESS:
        findings = _id_uniqueness(table, params.get("id_column", "patient_id"))
        passed = not findings["duplicates"]
        lines = [f"id column: {findings['id_column']}"]
        lines += [
            f"duplicate id {v}: rows {rows}" for v, rows in findings["duplicates"].items()
        ]
        if passed:
            lines.append("all ids unique")
    elif kind is DataKind.FORMAT_COMPLIANCE:
        findings = _format_compliance(catalog, int(params.get("limit", DEFAULT_SMS_LIMIT)))
        passed = not findings["over_limit"]
        lines = [
            f"limit: {findings['limit']}",
            f"max observed char_count: {findings['max_char_count']}",
        ]
        lines += [f"over limit: {o['name']} ({o['char_count']})" for o in findings["over_limit"]]
        lines += [
            f"printed count mismatch: {m['name']} recomputed {m['char_count']} vs printed {m['printed_char_count']}"
            for m in findings["count_mismatches"]
        ]
    elif kind is DataKind.PROVENANCE:
        findings = _provenance_record(table, params)
        passed = True
        lines = [f"source: {findings['source']}", f"rows: {findings['row_count']}"]
    elif kind is DataKind.EXPERIMENT_CONFIG:
        findings = _experiment_config(
            table, float(params.get("balance_tolerance", DEFAULT_BALANCE_TOLERANCE))
        )
        passed = findings["balance"]["passed"]
        lines = [
            f"{variant}: share {share:.4f}"
            for variant, share in findings["balance"]["shares"].items()
        ]
        lines.append(
            f"balance {'within' if passed else 'outside'} tolerance "
            f"{findings['balance']['tolerance']}"
        )
    else:
        raise UnsupportedKind(str(kind))

    payload = {
        "layer": Layer.DATA.value,
        "kind": kind.value,
        "findings": findings,
        "passed": passed,
    }
    report = "\n".join(lines)
    return payload, report
