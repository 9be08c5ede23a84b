"""Information-layer statistics against independent oracles."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dikwflow.artifacts import (
    ContextSpec,
    InfoTopic,
    Predicate,
    PredicateOp,
    QueryKind,
    SliceSpec,
)
from dikwflow.dataset import REQUIRED_COLUMNS, EncounterTable
from dikwflow.info_agent import (
    DegenerateGroup,
    DomainError,
    EmptySlice,
    apply_slice,
    chi_square_independence,
    pearson_correlation,
    rate_with_ci,
    relative_lift,
    resolve_info_topic,
    two_proportion_test,
)
from oracles import (
    brute_age_band,
    brute_breakdown,
    brute_funnel,
    brute_group_counts,
    brute_rate,
    oracle_chi2,
    oracle_pearson,
    oracle_two_prop,
    oracle_wilson,
)

TOL = 1e-9


def make_table(rows: list[dict]) -> EncounterTable:
    columns = {spec.name: [r.get(spec.name) for r in rows] for spec in REQUIRED_COLUMNS}
    return EncounterTable(columns, REQUIRED_COLUMNS)


def row(i, variant="default", clicked=False, authenticated=False, redeemed=False,
        age=40, gender="F", state="OH", drug="derm"):
    return {
        "patient_id": f"p{i}",
        "variant": variant,
        "clicked": clicked,
        "authenticated": authenticated,
        "opted_out": False,
        "redeemed": redeemed,
        "age": age,
        "gender": gender,
        "state": state,
        "drug_category": drug,
        "sent_at": "2024-01-01",
    }


def random_rows(rng: random.Random, n: int) -> list[dict]:
    rows = []
    for i in range(n):
        clicked = rng.random() < 0.5
        authenticated = clicked and rng.random() < 0.6
        redeemed = authenticated and rng.random() < 0.5
        # occasionally break funnel monotonicity on purpose
        if rng.random() < 0.05:
            authenticated = True
            clicked = False
        rows.append(
            row(
                i,
                variant=rng.choice(["A", "B"]),
                clicked=clicked,
                authenticated=authenticated,
                redeemed=redeemed,
                age=rng.choice([None, rng.randint(18, 90)]),
                gender=rng.choice([None, "F", "M"]),
            )
        )
    return rows


# --- rate / Wilson ---------------------------------------------------------


def test_rate_basic():
    result = rate_with_ci(6, 10)
    assert result.estimate == pytest.approx(0.6)
    assert result.n == 10 and result.k == 6


def test_wilson_6_of_10_frozen():
    # Frozen from the mpmath oracle evaluation of the Wilson formula.
    result = rate_with_ci(6, 10)
    assert result.ci_low == pytest.approx(0.31267376973365827, abs=TOL)
    assert result.ci_high == pytest.approx(0.83181967029376388, abs=TOL)


def test_wilson_6876_of_10000_frozen():
    result = rate_with_ci(6876, 10000)
    assert result.ci_low == pytest.approx(0.6784455373583168, abs=TOL)
    assert result.ci_high == pytest.approx(0.69661038645300534, abs=TOL)
    assert result.ci_low < 0.6876 < result.ci_high


def test_wilson_boundaries():
    zero = rate_with_ci(0, 10)
    assert zero.estimate == 0.0 and zero.ci_low == 0.0
    full = rate_with_ci(10, 10)
    assert full.estimate == 1.0 and full.ci_high == 1.0


def test_rate_domain_errors():
    for k, n in [(-1, 10), (11, 10), (0, 0)]:
        with pytest.raises(DomainError):
            rate_with_ci(k, n)
    with pytest.raises(DomainError):
        rate_with_ci(1, 2, level=1.0)


@given(st.integers(0, 60), st.integers(1, 60))
def test_wilson_matches_oracle(k, n):
    k = min(k, n)
    result = rate_with_ci(k, n)
    lo, hi = oracle_wilson(k, n)
    assert result.ci_low == pytest.approx(max(0.0, lo), abs=TOL)
    assert result.ci_high == pytest.approx(min(1.0, hi), abs=TOL)
    assert result.ci_low <= result.estimate <= result.ci_high


# --- two-proportion test -----------------------------------------------------


def test_two_prop_equal_rates():
    result = two_proportion_test(50, 100, 50, 100)
    assert result.test_statistic == pytest.approx(0.0, abs=TOL)
    assert result.p_value == pytest.approx(1.0, abs=TOL)


def test_two_prop_degenerate_all_zero():
    result = two_proportion_test(0, 100, 0, 100)
    assert "degenerate" in result.flags
    assert result.estimate == 0.0
    assert result.test_statistic is None and result.p_value is None


def test_two_prop_frozen():
    result = two_proportion_test(60, 100, 50, 100)
    assert result.test_statistic == pytest.approx(1.4213381090374029, abs=TOL)
    assert result.p_value == pytest.approx(0.15521848968468403, abs=TOL)


@given(st.integers(0, 40), st.integers(1, 40), st.integers(0, 40), st.integers(1, 40))
def test_two_prop_matches_oracle(k1, n1, k2, n2):
    k1, k2 = min(k1, n1), min(k2, n2)
    result = two_proportion_test(k1, n1, k2, n2)
    z, p = oracle_two_prop(k1, n1, k2, n2)
    if z is None:
        assert "degenerate" in result.flags
    else:
        assert result.test_statistic == pytest.approx(z, abs=TOL)
        assert result.p_value == pytest.approx(p, abs=TOL)
        assert 0.0 <= result.p_value <= 1.0


# --- chi-square / pearson ----------------------------------------------------


def test_chi2_frozen():
    pairs = [("A", "x")] * 30 + [("A", "y")] * 20 + [("B", "x")] * 20 + [("B", "y")] * 30
    result = chi_square_independence(pairs)
    assert result.test_statistic == pytest.approx(4.0, abs=TOL)
    assert result.dof == 1
    assert result.p_value == pytest.approx(0.045500263896358414, abs=TOL)


def test_chi2_degenerate_single_level():
    with pytest.raises(DegenerateGroup):
        chi_square_independence([("A", "x"), ("A", "y")])


def test_pearson_perfect():
    result = pearson_correlation([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
    assert result.estimate == pytest.approx(1.0, abs=TOL)
    assert result.p_value == 0.0
    assert "perfect_correlation" in result.flags


def test_pearson_constant_degenerate():
    with pytest.raises(DegenerateGroup):
        pearson_correlation([1, 2, 3, 4], [5, 5, 5, 5])


def test_pearson_too_few_pairs():
    with pytest.raises(DegenerateGroup):
        pearson_correlation([1, None, 3], [1, 2, 3])


def test_pearson_frozen_fixture():
    xs = [2, 5, 1, 8, 7, 3, 6, 4]
    ys = [3.1, 6.0, 2.2, 9.5, 8.1, 3.9, 6.8, 5.2]
    result = pearson_correlation(xs, ys)
    # r pinned to 1e-12 per the independent covariance oracle
    assert result.estimate == pytest.approx(0.99652444860501744, abs=1e-12)
    assert result.test_statistic == pytest.approx(29.303156826526387, abs=1e-9)
    assert result.p_value == pytest.approx(1.0468354115280808e-7, rel=1e-9)


# --- relative lift -----------------------------------------------------------


def test_relative_lift_headline():
    assert relative_lift(0.6876, 0.6127) == pytest.approx(0.1222, abs=0.0005)


def test_relative_lift_identity_and_domain():
    assert relative_lift(0.4, 0.4) == 0.0
    with pytest.raises(DomainError):
        relative_lift(0.5, 0.0)


# --- slicing -----------------------------------------------------------------


def test_slice_conjunction_and_negation_partition():
    rows = [row(i, variant="A" if i % 3 else "B", clicked=i % 2 == 0) for i in range(30)]
    table = make_table(rows)
    eq = SliceSpec((Predicate("variant", PredicateOp.EQ, "A"),))
    neq = SliceSpec((Predicate("variant", PredicateOp.NEQ, "A"),))
    assert len(apply_slice(table, eq)) + len(apply_slice(table, neq)) == 30


def test_slice_null_fails_all_predicates():
    rows = [row(0, age=None), row(1, age=70)]
    table = make_table(rows)
    assert apply_slice(table, SliceSpec((Predicate("age", PredicateOp.GE, 0),))) == [1]
    assert apply_slice(table, SliceSpec((Predicate("age", PredicateOp.NOT_NULL),))) == [1]


def test_slice_age_band_derived():
    rows = [row(0, age=30), row(1, age=50), row(2, age=70), row(3, age=None)]
    table = make_table(rows)
    older = apply_slice(table, SliceSpec((Predicate("age_band", PredicateOp.EQ, "65+"),)))
    assert older == [2]


def test_slice_in_and_ranges():
    rows = [row(i, state=s) for i, s in enumerate(["OH", "TX", "CA", "OH"])]
    table = make_table(rows)
    result = apply_slice(table, SliceSpec((Predicate("state", PredicateOp.IN, ("OH", "CA")),)))
    assert result == [0, 2, 3]


# --- resolve_info_topic ------------------------------------------------------


def test_resolve_rate_trivial():
    rows = [row(i, clicked=i < 6) for i in range(10)]
    payload, report = resolve_info_topic(
        make_table(rows),
        InfoTopic(slice=SliceSpec(), context=ContextSpec(), subject="clicked", query=QueryKind.RATE),
    )
    assert payload["result"]["estimate"] == pytest.approx(0.6)
    assert payload["result"]["n"] == 10
    assert "rate of clicked over full table: 0.6000" in report


def test_resolve_empty_slice_raises():
    rows = [row(0)]
    topic = InfoTopic(
        slice=SliceSpec((Predicate("variant", PredicateOp.EQ, "ghost"),)),
        context=ContextSpec(),
        subject="clicked",
        query=QueryKind.RATE,
    )
    with pytest.raises(EmptySlice):
        resolve_info_topic(make_table(rows), topic)


def test_resolve_count_allows_empty():
    rows = [row(0)]
    topic = InfoTopic(
        slice=SliceSpec((Predicate("variant", PredicateOp.EQ, "ghost"),)),
        context=ContextSpec(),
        subject="clicked",
        query=QueryKind.COUNT,
    )
    payload, _ = resolve_info_topic(make_table(rows), topic)
    assert payload["result"]["n"] == 0


def test_resolve_two_prop_empty_group_degenerate():
    rows = [row(i, variant="A", clicked=True) for i in range(5)]
    topic = InfoTopic(
        slice=SliceSpec(),
        context=ContextSpec(group_column="variant", group_a="A", group_b="B"),
        subject="clicked",
        query=QueryKind.TWO_PROPORTION_TEST,
    )
    with pytest.raises(DegenerateGroup):
        resolve_info_topic(make_table(rows), topic)


def test_resolve_funnel_trivial():
    rows = [
        row(i, clicked=i < 6, authenticated=i < 3, redeemed=i < 1)
        for i in range(10)
    ]
    payload, report = resolve_info_topic(
        make_table(rows),
        InfoTopic(slice=SliceSpec(), context=ContextSpec(), subject="clicked", query=QueryKind.FUNNEL),
    )
    stages = payload["result"]["group_results"]
    assert [s["estimate"] for s in stages] == pytest.approx([0.6, 0.3, 0.1])
    assert stages[1]["conditional"] == pytest.approx(0.5)
    assert stages[2]["conditional"] == pytest.approx(1 / 3)
    assert "monotonicity" not in report


def test_resolve_funnel_monotonicity_warning():
    rows = [row(0, clicked=False, authenticated=True), row(1, clicked=True)]
    payload, report = resolve_info_topic(
        make_table(rows),
        InfoTopic(slice=SliceSpec(), context=ContextSpec(), subject="clicked", query=QueryKind.FUNNEL),
    )
    assert "monotonicity_warning" in payload["result"]["flags"]
    assert "monotonicity" in report


def test_resolve_breakdown_excludes_all_null_group():
    rows = [row(0, gender="F", age=30), row(1, gender="M", age=None)]
    # subject=age is numeric: per-group mean; M group has only nulls
    payload, report = resolve_info_topic(
        make_table(rows),
        InfoTopic(
            slice=SliceSpec(),
            context=ContextSpec(group_column="gender"),
            subject="age",
            query=QueryKind.SEGMENT_BREAKDOWN,
        ),
    )
    labels = [g["label"] for g in payload["result"]["group_results"]]
    assert labels == ["F"]
    assert "excluded" in report


def test_resolve_deterministic_byte_identical():
    rows = [row(i, clicked=i % 2 == 0) for i in range(10)]
    table = make_table(rows)
    topic = InfoTopic(slice=SliceSpec(), context=ContextSpec(), subject="clicked", query=QueryKind.RATE)
    assert resolve_info_topic(table, topic) == resolve_info_topic(table, topic)


def test_facts_only_payload():
    # Structural boundary: no interpretive fields anywhere in the payload.
    rows = [row(i, variant="A" if i % 2 else "B", clicked=i % 3 == 0) for i in range(20)]
    topic = InfoTopic(
        slice=SliceSpec(),
        context=ContextSpec(group_column="variant", group_a="A", group_b="B"),
        subject="clicked",
        query=QueryKind.TWO_PROPORTION_TEST,
    )
    payload, report = resolve_info_topic(make_table(rows), topic)

    def keys(obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                yield k
                yield from keys(v)
        elif isinstance(obj, list):
            for v in obj:
                yield from keys(v)

    forbidden = {"conclusion", "verdict", "significance", "recommendation", "interpretation"}
    assert forbidden.isdisjoint(set(keys(payload)))
    assert "significan" not in report  # no significance language in facts


# --- randomized oracle equivalence (module-scale; full 200-table sweep in
# --- the acceptance suite) ---------------------------------------------------


@pytest.mark.parametrize("seed", range(12))
def test_random_table_oracle_equivalence(seed):
    rng = random.Random(1000 + seed)
    rows = random_rows(rng, rng.randint(8, 50))
    table = make_table(rows)

    payload, _ = resolve_info_topic(
        table, InfoTopic(slice=SliceSpec(), context=ContextSpec(), subject="clicked", query=QueryKind.RATE)
    )
    k, n = brute_rate(rows, "clicked")
    assert payload["result"]["estimate"] == pytest.approx(k / n, abs=TOL)
    lo, hi = oracle_wilson(k, n)
    assert payload["result"]["ci_low"] == pytest.approx(max(0.0, lo), abs=TOL)
    assert payload["result"]["ci_high"] == pytest.approx(min(1.0, hi), abs=TOL)

    topic = InfoTopic(
        slice=SliceSpec(),
        context=ContextSpec(group_column="variant", group_a="A", group_b="B"),
        subject="clicked",
        query=QueryKind.TWO_PROPORTION_TEST,
    )
    k1, n1 = brute_group_counts(rows, "clicked", "variant", "A")
    k2, n2 = brute_group_counts(rows, "clicked", "variant", "B")
    if n1 == 0 or n2 == 0:
        with pytest.raises(DegenerateGroup):
            resolve_info_topic(table, topic)
    else:
        payload, _ = resolve_info_topic(table, topic)
        z, p = oracle_two_prop(k1, n1, k2, n2)
        if z is None:
            assert "degenerate" in payload["result"]["flags"]
        else:
            assert payload["result"]["test_statistic"] == pytest.approx(z, abs=TOL)
            assert payload["result"]["p_value"] == pytest.approx(p, abs=TOL)

    funnel_payload, _ = resolve_info_topic(
        table, InfoTopic(slice=SliceSpec(), context=ContextSpec(), subject="clicked", query=QueryKind.FUNNEL)
    )
    expected = brute_funnel(rows)
    stages = funnel_payload["result"]["group_results"]
    for stage, rate in zip(stages, expected["rates"]):
        assert stage["estimate"] == pytest.approx(rate, abs=TOL)
    assert ("monotonicity_warning" in funnel_payload["result"]["flags"]) == expected["violated"]

    breakdown_topic = InfoTopic(
        slice=SliceSpec(),
        context=ContextSpec(group_column="age_band"),
        subject="clicked",
        query=QueryKind.SEGMENT_BREAKDOWN,
    )
    expected_groups = brute_breakdown(rows, "clicked", lambda r: brute_age_band(r["age"]))
    if expected_groups:
        payload, _ = resolve_info_topic(table, breakdown_topic)
        got = {g["label"]: (g["k"], g["n"]) for g in payload["result"]["group_results"]}
        assert got == expected_groups
