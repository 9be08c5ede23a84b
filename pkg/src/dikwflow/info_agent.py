"""Information-layer statistics: deterministic facts about the current table.

Every resolver returns computed statistics without interpretive labels:
no verdicts, no recommendations, no significance language. The knowledge
layer is the one that judges.

Tail probabilities: normal via the stdlib's erf-backed NormalDist,
Student-t and chi-square via scipy.special. The test suite checks all of
them against an independent mpmath oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any, Sequence

from scipy.special import chdtrc, stdtr

from .artifacts import (
    AgeBin,
    ContextSpec,
    InfoTopic,
    Layer,
    Predicate,
    PredicateOp,
    QueryKind,
    SliceSpec,
)
from .dataset import ColumnType, EncounterTable

_NORMAL = NormalDist()

DEFAULT_CI_LEVEL = 0.95

DEFAULT_AGE_BINS: tuple[AgeBin, ...] = (
    AgeBin("18-44", 18, 44),
    AgeBin("45-64", 45, 64),
    AgeBin("65+", 65, None),
)

AGE_BAND_COLUMN = "age_band"


class EmptySlice(ValueError):
    def __init__(self, slice_spec: SliceSpec):
        super().__init__(f"slice matches zero rows: {slice_spec.describe()}")


class DegenerateGroup(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class StatResult:
    query: QueryKind
    estimate: float | None
    n: int
    k: int | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    ci_level: float | None = None
    test_statistic: float | None = None
    p_value: float | None = None
    dof: int | None = None
    group_results: tuple[dict[str, Any], ...] | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "query": self.query.value,
            "estimate": self.estimate,
            "n": self.n,
        }
        for name in ("k", "ci_low", "ci_high", "ci_level", "test_statistic", "p_value", "dof"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.group_results is not None:
            out["group_results"] = list(self.group_results)
        out["flags"] = list(self.flags)
        return out


# ---------------------------------------------------------------------------
# Slicing
# ---------------------------------------------------------------------------


def age_band(age: int | None, bins: Sequence[AgeBin]) -> str | None:
    if age is None:
        return None
    for b in bins:
        if age >= b.low and (b.high is None or age <= b.high):
            return b.label
    return None


def _column_values(table: EncounterTable, name: str, bins: Sequence[AgeBin]) -> list[Any]:
    """Real column, or the derived age_band computed from age."""
    if name == AGE_BAND_COLUMN and not table.has_column(AGE_BAND_COLUMN):
        return [age_band(a, bins) for a in table.column("age")]
    return table.column(name)


def _matches(value: Any, predicate: Predicate) -> bool:
    # Null cells satisfy no predicate, including NotNull.
    if value is None:
        return False
    op = predicate.op
    if op is PredicateOp.NOT_NULL:
        return True
    if op is PredicateOp.EQ:
        return value == predicate.value
    if op is PredicateOp.NEQ:
        return value != predicate.value
    if op is PredicateOp.IN:
        return value in predicate.value
    if op is PredicateOp.LT:
        return value < predicate.value
    if op is PredicateOp.LE:
        return value <= predicate.value
    if op is PredicateOp.GT:
        return value > predicate.value
    if op is PredicateOp.GE:
        return value >= predicate.value
    raise DomainError(f"unknown predicate op {op}")


def apply_slice(
    table: EncounterTable,
    slice_spec: SliceSpec,
    bins: Sequence[AgeBin] = DEFAULT_AGE_BINS,
) -> list[int]:
    """Row indices matching every predicate (conjunction)."""
    indices = list(range(table.row_count))
    for predicate in slice_spec.predicates:
        values = _column_values(table, predicate.column, bins)
        indices = [i for i in indices if _matches(values[i], predicate)]
    return indices


# ---------------------------------------------------------------------------
# Core statistics
# ---------------------------------------------------------------------------


def rate_with_ci(k: int, n: int, level: float = DEFAULT_CI_LEVEL) -> StatResult:
    """Binomial rate with a Wilson score interval (no continuity correction)."""
    if n < 1 or not 0 <= k <= n:
        raise DomainError(f"rate requires 0 <= k <= n, n >= 1; got k={k}, n={n}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"ci level must lie in (0,1); got {level}")
    p = k / n
    z = _NORMAL.inv_cdf(1.0 - (1.0 - level) / 2.0)
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    # at k=0 / k=n the Wilson bound is exactly 0 / 1; don't let rounding drift it
    ci_low = 0.0 if k == 0 else max(0.0, center - half)
    ci_high = 1.0 if k == n else min(1.0, center + half)
    return StatResult(
        query=QueryKind.RATE,
        estimate=p,
        n=n,
        k=k,
        ci_low=ci_low,
        ci_high=ci_high,
        ci_level=level,
    )


def two_proportion_test(
    k1: int, n1: int, k2: int, n2: int, labels: tuple[str, str] = ("a", "b")
) -> StatResult:
    """Pooled two-sided z-test for p1 - p2; facts only, no verdict."""
    if n1 < 1 or n2 < 1:
        raise DomainError(f"both groups need n >= 1; got n1={n1}, n2={n2}")
    p1, p2 = k1 / n1, k2 / n2
    groups = (
        {"label": labels[0], "k": k1, "n": n1, "estimate": p1},
        {"label": labels[1], "k": k2, "n": n2, "estimate": p2},
    )
    pooled = (k1 + k2) / (n1 + n2)
    if pooled <= 0.0 or pooled >= 1.0:
        # zero pooled variance: z undefined, report the difference only
        return StatResult(
            query=QueryKind.TWO_PROPORTION_TEST,
            estimate=p1 - p2,
            n=n1 + n2,
            group_results=groups,
            flags=("degenerate",),
        )
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = (p1 - p2) / se
    p_value = 2.0 * _NORMAL.cdf(-abs(z))
    return StatResult(
        query=QueryKind.TWO_PROPORTION_TEST,
        estimate=p1 - p2,
        n=n1 + n2,
        test_statistic=z,
        p_value=p_value,
        group_results=groups,
    )


def chi_square_independence(pairs: Sequence[tuple[Any, Any]]) -> StatResult:
    """Pearson chi-square over the contingency table of two categoricals."""
    if not pairs:
        raise DegenerateGroup("no complete pairs for contingency table")
    row_labels = sorted({str(a) for a, _ in pairs})
    col_labels = sorted({str(b) for _, b in pairs})
    if len(row_labels) < 2 or len(col_labels) < 2:
        raise DegenerateGroup(
            f"contingency needs >= 2 levels per side; got {len(row_labels)}x{len(col_labels)}"
        )
    counts = {(r, c): 0 for r in row_labels for c in col_labels}
    for a, b in pairs:
        counts[(str(a), str(b))] += 1
    total = len(pairs)
    row_sums = {r: sum(counts[(r, c)] for c in col_labels) for r in row_labels}
    col_sums = {c: sum(counts[(r, c)] for r in row_labels) for c in col_labels}
    statistic = 0.0
    for r in row_labels:
        for c in col_labels:
            expected = row_sums[r] * col_sums[c] / total
            statistic += (counts[(r, c)] - expected) ** 2 / expected
    dof = (len(row_labels) - 1) * (len(col_labels) - 1)
    p_value = float(chdtrc(dof, statistic))
    return StatResult(
        query=QueryKind.CHI_SQUARE_INDEPENDENCE,
        estimate=statistic,
        n=total,
        test_statistic=statistic,
        p_value=p_value,
        dof=dof,
    )


def pearson_correlation(xs: Sequence[float], ys: Sequence[float]) -> StatResult:
    """Pearson r over pairwise-complete pairs; two-sided p via t with n-2 dof."""
    pairs = [(x, y) for x, y in zip(xs, ys) if x is not None and y is not None]
    n = len(pairs)
    if n < 3:
        raise DegenerateGroup(f"correlation needs >= 3 complete pairs; got {n}")
    mean_x = sum(x for x, _ in pairs) / n
    mean_y = sum(y for _, y in pairs) / n
    var_x = sum((x - mean_x) ** 2 for x, _ in pairs)
    var_y = sum((y - mean_y) ** 2 for _, y in pairs)
    if var_x == 0.0 or var_y == 0.0:
        raise DegenerateGroup("correlation undefined: zero variance")
    cov = sum((x - mean_x) * (y - mean_y) for x, y in pairs)
    r = cov / math.sqrt(var_x * var_y)
    r = max(-1.0, min(1.0, r))
    dof = n - 2
    if 1.0 - r * r < 1e-15:
        # |r| = 1: t diverges, tail probability is exactly 0
        return StatResult(
            query=QueryKind.PEARSON_CORRELATION,
            estimate=r,
            n=n,
            p_value=0.0,
            dof=dof,
            flags=("perfect_correlation",),
        )
    t = r * math.sqrt(dof / (1.0 - r * r))
    p_value = 2.0 * float(stdtr(dof, -abs(t)))
    return StatResult(
        query=QueryKind.PEARSON_CORRELATION,
        estimate=r,
        n=n,
        test_statistic=t,
        p_value=p_value,
        dof=dof,
    )


def relative_lift(treatment_rate: float, baseline_rate: float) -> float:
    if baseline_rate <= 0.0:
        raise DomainError(f"relative lift needs baseline > 0; got {baseline_rate}")
    return (treatment_rate - baseline_rate) / baseline_rate


# ---------------------------------------------------------------------------
# Topic resolution
# ---------------------------------------------------------------------------


def _subject_values(
    table: EncounterTable, indices: list[int], subject: str, bins: Sequence[AgeBin]
) -> list[Any]:
    values = _column_values(table, subject, bins)
    return [values[i] for i in indices]


def _bool_counts(values: list[Any]) -> tuple[int, int]:
    non_null = [v for v in values if v is not None]
    return sum(1 for v in non_null if v), len(non_null)


def _is_bool_column(table: EncounterTable, name: str) -> bool:
    for spec in table.schema:
        if spec.name == name:
            return spec.type is ColumnType.BOOL
    return False


def _funnel(table: EncounterTable, indices: list[int]) -> StatResult:
    n = len(indices)
    clicked = table.column("clicked")
    authenticated = table.column("authenticated")
    redeemed = table.column("redeemed")
    k_click = sum(1 for i in indices if clicked[i])
    k_auth = sum(1 for i in indices if authenticated[i])
    k_redeem = sum(1 for i in indices if redeemed[i])
    violations = sum(
        1
        for i in indices
        if (authenticated[i] and not clicked[i]) or (redeemed[i] and not authenticated[i])
    )
    stages = (
        {"label": "clicked", "k": k_click, "n": n, "estimate": k_click / n,
         "conditional": k_click / n},
        {"label": "authenticated", "k": k_auth, "n": n, "estimate": k_auth / n,
         "conditional": k_auth / k_click if k_click else None},
        {"label": "redeemed", "k": k_redeem, "n": n, "estimate": k_redeem / n,
         "conditional": k_redeem / k_auth if k_auth else None},
    )
    flags = ("monotonicity_warning",) if violations else ()
    return StatResult(
        query=QueryKind.FUNNEL,
        estimate=k_click / n,
        n=n,
        group_results=stages,
        flags=flags,
    )


def _segment_breakdown(
    table: EncounterTable,
    indices: list[int],
    subject: str,
    group_column: str,
    bins: Sequence[AgeBin],
) -> StatResult:
    group_values = _column_values(table, group_column, bins)
    subject_values = _column_values(table, subject, bins)
    by_group: dict[str, list[Any]] = {}
    for i in indices:
        g = group_values[i]
        if g is None:
            continue
        by_group.setdefault(str(g), []).append(subject_values[i])
    if not by_group:
        raise DegenerateGroup(f"no non-null {group_column} values in slice")
    as_rate = _is_bool_column(table, subject)
    groups: list[dict[str, Any]] = []
    excluded: list[str] = []
    total_k = 0
    total_n = 0
    for label in sorted(by_group):
        values = [v for v in by_group[label] if v is not None]
        if not values:
            excluded.append(label)
            continue
        if as_rate:
            k = sum(1 for v in values if v)
            groups.append({"label": label, "k": k, "n": len(values), "estimate": k / len(values)})
            total_k += k
        else:
            groups.append({
                "label": label,
                "n": len(values),
                "estimate": sum(values) / len(values),
            })
        total_n += len(values)
    if not groups:
        raise DegenerateGroup(f"all groups have null {subject}")
    if as_rate:
        overall = total_k / total_n
    else:
        overall = sum(g["estimate"] * g["n"] for g in groups) / total_n
    flags = tuple(f"excluded_group:{label}" for label in excluded)
    return StatResult(
        query=QueryKind.SEGMENT_BREAKDOWN,
        estimate=overall,
        n=total_n,
        group_results=tuple(groups),
        flags=flags,
    )


def _format_p(p: float) -> str:
    return f"{p:.6g}"


def _report(result: StatResult, topic: InfoTopic) -> str:
    where = topic.slice.describe()
    r = result
    if r.query is QueryKind.RATE:
        return (
            f"rate of {topic.subject} over {where}: {r.estimate:.4f} "
            f"(k={r.k}, n={r.n}); wilson {r.ci_level:g} interval "
            f"[{r.ci_low:.4f}, {r.ci_high:.4f}]"
        )
    if r.query is QueryKind.MEAN:
        return f"mean of {topic.subject} over {where}: {r.estimate:.4f} (n={r.n})"
    if r.query is QueryKind.COUNT:
        return f"count of rows over {where}: {r.n}"
    if r.query is QueryKind.TWO_PROPORTION_TEST:
        a, b = r.group_results
        head = (
            f"two-proportion z-test on {topic.subject} over {where}: "
            f"{a['label']} {a['estimate']:.4f} (k={a['k']}, n={a['n']}) vs "
            f"{b['label']} {b['estimate']:.4f} (k={b['k']}, n={b['n']}); "
            f"difference {r.estimate:+.4f}"
        )
        if "degenerate" in r.flags:
            return head + "; pooled variance zero, test statistic undefined"
        return head + f"; z={r.test_statistic:.4f}; p={_format_p(r.p_value)}"
    if r.query is QueryKind.CHI_SQUARE_INDEPENDENCE:
        return (
            f"chi-square independence of {topic.subject} and "
            f"{topic.context.group_column} over {where}: statistic "
            f"{r.test_statistic:.4f}, dof={r.dof}, p={_format_p(r.p_value)} (n={r.n})"
        )
    if r.query is QueryKind.PEARSON_CORRELATION:
        if r.test_statistic is None:
            return (
                f"pearson correlation of {topic.subject} and {topic.context.subject2} "
                f"over {where}: r={r.estimate:.6f}, p={_format_p(r.p_value)} (n={r.n})"
            )
        return (
            f"pearson correlation of {topic.subject} and {topic.context.subject2} "
            f"over {where}: r={r.estimate:.6f}, t={r.test_statistic:.4f}, "
            f"p={_format_p(r.p_value)} (n={r.n})"
        )
    if r.query is QueryKind.SEGMENT_BREAKDOWN:
        lines = [f"breakdown of {topic.subject} by {topic.context.group_column} over {where}:"]
        for g in r.group_results:
            if "k" in g:
                lines.append(f"  {g['label']}: {g['estimate']:.4f} (k={g['k']}, n={g['n']})")
            else:
                lines.append(f"  {g['label']}: {g['estimate']:.4f} (n={g['n']})")
        for flag in r.flags:
            if flag.startswith("excluded_group:"):
                lines.append(f"  {flag.split(':', 1)[1]}: excluded, subject all null")
        return "\n".join(lines)
    if r.query is QueryKind.FUNNEL:
        parts = []
        for g in r.group_results:
            cond = "n/a" if g["conditional"] is None else f"{g['conditional']:.4f}"
            parts.append(f"{g['label']} {g['estimate']:.4f} (conditional {cond})")
        line = f"funnel over {where} (n={r.n}): " + "; ".join(parts)
        if "monotonicity_warning" in r.flags:
            line += "\nwarning: funnel monotonicity violated by at least one row"
        return line
    raise DomainError(f"no report template for {r.query}")


def resolve_info_topic(table: EncounterTable, topic: InfoTopic) -> tuple[dict[str, Any], str]:
    """Resolve one information topic to (payload, report). Deterministic."""
    topic.validate()
    bins = topic.context.age_bins or DEFAULT_AGE_BINS
    indices = apply_slice(table, topic.slice, bins)
    query = topic.query

    if query is QueryKind.COUNT:
        result = StatResult(query=query, estimate=float(len(indices)), n=len(indices))
    else:
        if not indices:
            raise EmptySlice(topic.slice)
        if query is QueryKind.RATE:
            values = _subject_values(table, indices, topic.subject, bins)
            k, n = _bool_counts(values)
            if n == 0:
                raise EmptySlice(topic.slice)
            result = rate_with_ci(k, n)
        elif query is QueryKind.MEAN:
            values = [
                v for v in _subject_values(table, indices, topic.subject, bins) if v is not None
            ]
            if not values:
                raise EmptySlice(topic.slice)
            result = StatResult(
                query=query, estimate=sum(values) / len(values), n=len(values)
            )
        elif query is QueryKind.TWO_PROPORTION_TEST:
            ctx = topic.context
            group_values = _column_values(table, ctx.group_column, bins)
            subject_values = _column_values(table, topic.subject, bins)
            k = {}
            n = {}
            for label in (ctx.group_a, ctx.group_b):
                rows = [i for i in indices if group_values[i] == label]
                values = [subject_values[i] for i in rows if subject_values[i] is not None]
                if not values:
                    raise DegenerateGroup(f"group {ctx.group_column}={label!r} is empty in slice")
                k[label] = sum(1 for v in values if v)
                n[label] = len(values)
            result = two_proportion_test(
                k[ctx.group_a], n[ctx.group_a], k[ctx.group_b], n[ctx.group_b],
                labels=(ctx.group_a, ctx.group_b),
            )
        elif query is QueryKind.CHI_SQUARE_INDEPENDENCE:
            group_values = _column_values(table, topic.context.group_column, bins)
            subject_values = _column_values(table, topic.subject, bins)
            pairs = [
                (group_values[i], subject_values[i])
                for i in indices
                if group_values[i] is not None and subject_values[i] is not None
            ]
            result = chi_square_independence(pairs)
        elif query is QueryKind.PEARSON_CORRELATION:
            xs = _subject_values(table, indices, topic.subject, bins)
            ys = _subject_values(table, indices, topic.context.subject2, bins)
            result = pearson_correlation(
                [float(x) if x is not None else None for x in xs],
                [float(y) if y is not None else None for y in ys],
            )
        elif query is QueryKind.SEGMENT_BREAKDOWN:
            result = _segment_breakdown(table, indices, topic.subject, topic.context.group_column, bins)
        elif query is QueryKind.FUNNEL:
            result = _funnel(table, indices)
        else:
            raise DomainError(f"no resolver for query {query}")

    payload = {
        "layer": Layer.INFORMATION.value,
        "subject": topic.subject,
        "slice": topic.slice.to_body(),
        "context": topic.context.to_body(),
        "result": result.to_dict(),
    }
    return payload, _report(result, topic)
