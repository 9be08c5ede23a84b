"""Wisdom agent: turns scored claims into a constrained message portfolio.

Portfolio slots split between exploitation (high-confidence claims, ranked by
support) and exploration (weakly supported claims or tag combinations the
current catalog has not tried). Every candidate traces to the claims behind
it, carries a per-constraint check report, and drafts either through the
language-model adapter or through the deterministic template grammar.
"""

from __future__ import annotations

import dataclasses
import json
import re
import unicodedata
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from . import textgen
from .artifacts import (
    DescriptorKind,
    Layer,
    Relation,
    TopicId,
    WisdomTopic,
    canonical_hash,
)
from .dataset import MessageCatalog
from .knowledge_agent import ConfidenceBand, KnowledgeClaim
from .llm import CompletionRequest, LlmAdapter
from .textgen import Register, UnknownTag

AGENT_VERSION = "wisdom-agent/1"

DEFAULT_MAX_CHARS = 160
DEFAULT_FORBIDDEN_TOKENS = ("expire", "expires soon", "last chance", "act now or")
# Provider attribution must appear in the message lead-in; shipped exemplars
# allow a short greeting before it, hence the bounded prefix window.
DEFAULT_PREFIX_PATTERN = r"^.{0,24}\bDr\.\s"
RETRY_BUDGET = 3  # redrafts per slot after the first failing attempt


class InsufficientClaims(ValueError):
    """A mode has a nonzero quota but no eligible claims."""


class PortfolioMode(str, Enum):
    EXPLOITATION = "exploitation"
    EXPLORATION = "exploration"


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintSet:
    max_chars: int = DEFAULT_MAX_CHARS
    forbidden_tokens: tuple[str, ...] = DEFAULT_FORBIDDEN_TOKENS
    required_prefix_pattern: str = DEFAULT_PREFIX_PATTERN
    min_claims_traced: int = 1

    def validate(self) -> None:
        if self.max_chars < 1:
            raise ValueError("max_chars must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_chars": self.max_chars,
            "forbidden_tokens": list(self.forbidden_tokens),
            "required_prefix_pattern": self.required_prefix_pattern,
            "min_claims_traced": self.min_claims_traced,
        }


CONSTRAINT_SETS: dict[str, ConstraintSet] = {"default": ConstraintSet()}


def resolve_constraints(name: str) -> ConstraintSet:
    try:
        return CONSTRAINT_SETS[name]
    except KeyError:
        raise ValueError(f"unknown constraint set {name!r}") from None


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _normalized(text: str) -> str:
    return unicodedata.normalize("NFC", text).casefold()


def check_constraints(
    candidate: "MessageCandidate", constraints: ConstraintSet
) -> tuple[ConstraintCheck, ...]:
    """Per-constraint verdicts; failures name the offending token and position."""
    checks = []
    length = len(candidate.text)
    checks.append(
        ConstraintCheck(
            name="max_chars",
            passed=length <= constraints.max_chars,
            detail=f"{length} chars against limit {constraints.max_chars}",
        )
    )
    haystack = _normalized(candidate.text)
    hits = []
    for token in constraints.forbidden_tokens:
        position = haystack.find(_normalized(token))
        if position != -1:
            hits.append(f"{token!r} at {position}")
    checks.append(
        ConstraintCheck(
            name="forbidden_tokens",
            passed=not hits,
            detail="; ".join(hits) if hits else "none present",
        )
    )
    prefix_ok = bool(re.match(constraints.required_prefix_pattern, candidate.text))
    checks.append(
        ConstraintCheck(
            name="required_prefix",
            passed=prefix_ok,
            detail="attribution found" if prefix_ok else "no provider attribution in lead-in",
        )
    )
    checks.append(
        ConstraintCheck(
            name="min_claims_traced",
            passed=len(candidate.traced_claims) >= constraints.min_claims_traced,
            detail=f"{len(candidate.traced_claims)} traced, need {constraints.min_claims_traced}",
        )
    )
    return tuple(checks)


def all_pass(report: Iterable[ConstraintCheck]) -> bool:
    return all(check.passed for check in report)


# ---------------------------------------------------------------------------
# Design rules
# ---------------------------------------------------------------------------

CONTEXT_AXES = ("medical_urgency", "age_category", "condition_type", "geography")


@dataclass(frozen=True)
class CombinationRule:
    tags_combined: tuple[str, ...]
    rationale_ref: str  # literature-style metadata; stored, never recomputed


DEFAULT_COMBINATION_RULES = (
    CombinationRule(
        tags_combined=("authority", "task_completion"),
        rationale_ref=(
            "reported 1.7x lift over single-strategy messaging "
            "(95% CI [1.4, 2.1]); stored metadata, not recomputed here"
        ),
    ),
    CombinationRule(
        tags_combined=("authority", "urgency"),
        rationale_ref=(
            "reported 1.7x lift over single-strategy messaging "
            "(95% CI [1.4, 2.1]); stored metadata, not recomputed here"
        ),
    ),
)

DEFAULT_LINGUISTIC_MAP = (
    ("65+", Register.FORMAL),
    ("45-64", Register.ACTION_ORIENTED),
    ("18-44", Register.PERSONAL_HEALTH),
)


@dataclass(frozen=True)
class DesignRuleConfig:
    context_hierarchy: tuple[str, ...] = CONTEXT_AXES
    combination_rules: tuple[CombinationRule, ...] = DEFAULT_COMBINATION_RULES
    linguistic_map: tuple[tuple[str, Register], ...] = DEFAULT_LINGUISTIC_MAP
    hierarchy_validation_ref: str = (
        "hierarchy validation confidence 0.84 across 23 tested contexts; "
        "stored metadata, not recomputed here"
    )

    def validate(self) -> None:
        if sorted(self.context_hierarchy) != sorted(CONTEXT_AXES):
            raise ValueError(
                f"context_hierarchy must permute {CONTEXT_AXES}, got {self.context_hierarchy}"
            )

    def register_for(self, segment_label: str | None) -> Register:
        for label, register in self.linguistic_map:
            if label == segment_label:
                return register
        return Register.ACTION_ORIENTED


DEFAULT_RULES = DesignRuleConfig()


# ---------------------------------------------------------------------------
# Candidates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MessageCandidate:
    name: str
    text: str
    char_count: int
    strategy_tags: frozenset[str]
    generation: PortfolioMode
    traced_claims: tuple[TopicId, ...]
    rationale: str
    predicted_rank_basis: float  # sum of traced support scores; display ordering only
    constraint_report: tuple[ConstraintCheck, ...]
    rejected_by_review: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "text": self.text,
            "char_count": self.char_count,
            "strategy_tags": sorted(self.strategy_tags),
            "generation": self.generation.value,
            "traced_claims": [t.to_dict() for t in self.traced_claims],
            "rationale": self.rationale,
            "predicted_rank_basis": self.predicted_rank_basis,
            "constraint_report": [c.to_dict() for c in self.constraint_report],
            "rejected_by_review": self.rejected_by_review,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MessageCandidate":
        return cls(
            name=d["name"],
            text=d["text"],
            char_count=int(d["char_count"]),
            strategy_tags=frozenset(d.get("strategy_tags", ())),
            generation=PortfolioMode(d["generation"]),
            traced_claims=tuple(TopicId.from_dict(t) for t in d.get("traced_claims", ())),
            rationale=d.get("rationale", ""),
            predicted_rank_basis=float(d.get("predicted_rank_basis", 0.0)),
            constraint_report=tuple(
                ConstraintCheck(name=c["name"], passed=c["passed"], detail=c.get("detail", ""))
                for c in d.get("constraint_report", ())
            ),
            rejected_by_review=bool(d.get("rejected_by_review", False)),
        )


# ---------------------------------------------------------------------------
# Claim selection
# ---------------------------------------------------------------------------


def claim_hash(claim: KnowledgeClaim) -> str:
    return canonical_hash(claim.topic).hash


def claim_tag_combination(claim: KnowledgeClaim) -> frozenset[str]:
    tags = set()
    for side in (claim.topic.claim.left, claim.topic.claim.right):
        if side.kind is DescriptorKind.TAG:
            tags.add(side.value)
    return frozenset(tags)


def favored_tags(claim: KnowledgeClaim, catalog: MessageCatalog | None = None) -> tuple[str, ...]:
    """Strategy tags a designer would act on: the winning side of the claim."""
    hyp = claim.topic.claim
    side = hyp.right if hyp.relation is Relation.DECREASES else hyp.left
    if side.kind is DescriptorKind.TAG:
        return (side.value,)
    if side.kind is DescriptorKind.VARIANT and catalog is not None:
        try:
            entry = catalog.get(side.value)
        except KeyError:
            return ()
        return tuple(sorted(t.value for t in entry.strategy_tags))
    return ()


def select_claims(
    claims: Sequence[KnowledgeClaim],
    mode: PortfolioMode,
    catalog: MessageCatalog | None = None,
) -> list[KnowledgeClaim]:
    """Claims eligible for a portfolio mode, strongest support first."""
    if mode is PortfolioMode.EXPLOITATION:
        eligible = [c for c in claims if c.confidence_band is ConfidenceBand.HIGH]
    else:
        known = (
            {frozenset(t.value for t in combo) for combo in catalog.tag_combinations()}
            if catalog is not None
            else set()
        )
        eligible = [
            c
            for c in claims
            if c.confidence_band in (ConfidenceBand.MEDIUM, ConfidenceBand.LOW)
            or (catalog is not None and claim_tag_combination(c) not in known)
        ]
    return sorted(eligible, key=lambda c: (-c.support_score, claim_hash(c)))


# ---------------------------------------------------------------------------
# Drafting
# ---------------------------------------------------------------------------


def template_fallback(
    claim_tags: Sequence[str],
    rules: DesignRuleConfig = DEFAULT_RULES,
    segment_label: str | None = None,
    variation: int = 0,
) -> str:
    """Deterministic draft from the fixed grammar; no adapter involved."""
    register = rules.register_for(segment_label)
    return textgen.compose(tuple(claim_tags), register, variation)


def _draft(
    llm: LlmAdapter | None,
    tags: tuple[str, ...],
    register: Register,
    variation: int,
) -> tuple[str, str | None]:
    if llm is None:
        return textgen.compose(tags, register, variation), None
    request = CompletionRequest(
        layer=Layer.WISDOM,
        user_content=json.dumps(
            {"tags": list(tags), "register": register.value, "variation": variation},
            sort_keys=True,
        ),
    )
    text, exchange_id = llm.complete(request)
    return text, exchange_id


# ---------------------------------------------------------------------------
# Portfolio assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PortfolioResult:
    candidates: tuple[MessageCandidate, ...]
    shortfall: int
    shortfall_report: str
    llm_exchange_ids: tuple[str, ...]


def exploitation_quota(size: int, fraction: float) -> int:
    return int(size * fraction + 0.5)


def _compose_order(traced: Sequence[KnowledgeClaim], catalog: MessageCatalog | None) -> tuple[str, ...]:
    ordered: list[str] = []
    for claim in traced:
        for tag in favored_tags(claim, catalog):
            if tag not in ordered:
                ordered.append(tag)
    if not ordered:
        ordered.append("authority")
    return tuple(ordered)


def _rationale(
    mode: PortfolioMode,
    traced: Sequence[KnowledgeClaim],
    tags: tuple[str, ...],
    register: Register,
    rules: DesignRuleConfig,
) -> str:
    parts = [
        f"{mode.value} slot tracing {len(traced)} claim(s): "
        + "; ".join(c.topic.claim.describe() for c in traced),
        f"register {register.value}",
    ]
    tag_set = set(tags) | {"authority"}
    for rule in rules.combination_rules:
        if set(rule.tags_combined) <= tag_set:
            parts.append(rule.rationale_ref)
            break
    return ". ".join(parts)


def generate_portfolio(
    claims: Sequence[KnowledgeClaim],
    topic: WisdomTopic,
    rules: DesignRuleConfig = DEFAULT_RULES,
    constraints: ConstraintSet | None = None,
    llm: LlmAdapter | None = None,
    catalog: MessageCatalog | None = None,
) -> PortfolioResult:
    """Fill the portfolio quotas; deterministic for a fixed claim set and mode."""
    topic.validate()
    rules.validate()
    if constraints is None:
        constraints = resolve_constraints(topic.constraints)
    constraints.validate()

    quotas = {
        PortfolioMode.EXPLOITATION: exploitation_quota(
            topic.portfolio_size, topic.exploitation_fraction
        ),
    }
    quotas[PortfolioMode.EXPLORATION] = topic.portfolio_size - quotas[PortfolioMode.EXPLOITATION]
    segment_label = topic.target_segment.label if topic.target_segment else None
    register = rules.register_for(segment_label)

    candidates: list[MessageCandidate] = []
    dropped: list[str] = []
    exchange_ids: list[str] = []
    for mode in (PortfolioMode.EXPLOITATION, PortfolioMode.EXPLORATION):
        quota = quotas[mode]
        if quota == 0:
            continue
        eligible = select_claims(claims, mode, catalog)
        if not eligible:
            raise InsufficientClaims(f"no eligible claims for {mode.value} (quota {quota})")
        for slot in range(quota):
            wanted = min(2 + (slot % 3), len(eligible))
            traced_count = max(min(constraints.min_claims_traced, len(eligible)), wanted)
            traced = [eligible[(slot + j) % len(eligible)] for j in range(traced_count)]
            tags = _compose_order(traced, catalog)
            prefix = "exploit" if mode is PortfolioMode.EXPLOITATION else "explore"
            name = f"{prefix}{slot + 1:02d}"
            emitted = None
            for attempt in range(1 + RETRY_BUDGET):
                variation = slot + attempt * 101
                try:
                    text, exchange_id = _draft(llm, tags, register, variation)
                except UnknownTag:
                    text, exchange_id = _draft(llm, ("authority",), register, variation)
                if exchange_id is not None:
                    exchange_ids.append(exchange_id)
                draft = MessageCandidate(
                    name=name,
                    text=text,
                    char_count=len(text),
                    strategy_tags=frozenset(tags) | {"authority"},
                    generation=mode,
                    traced_claims=tuple(canonical_hash(c.topic) for c in traced),
                    rationale=_rationale(mode, traced, tags, register, rules),
                    predicted_rank_basis=sum(c.support_score for c in traced),
                    constraint_report=(),
                )
                report = check_constraints(draft, constraints)
                if all_pass(report):
                    emitted = dataclasses.replace(draft, constraint_report=report)
                    break
            if emitted is None:
                dropped.append(
                    f"{name}: no draft passed constraints after {1 + RETRY_BUDGET} attempts"
                )
            else:
                candidates.append(emitted)

    names = [c.name for c in candidates]
    if len(set(names)) != len(names):  # pragma: no cover - naming scheme is unique
        raise RuntimeError("portfolio produced duplicate candidate names")
    report_text = (
        f"shortfall {len(dropped)} of {topic.portfolio_size}:\n" + "\n".join(dropped)
        if dropped
        else ""
    )
    return PortfolioResult(
        candidates=tuple(candidates),
        shortfall=len(dropped),
        shortfall_report=report_text,
        llm_exchange_ids=tuple(exchange_ids),
    )


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def portfolio_payload(topic: WisdomTopic, result: PortfolioResult) -> dict[str, Any]:
    return {
        "layer": Layer.WISDOM.value,
        "objective": topic.objective,
        "portfolio_size": topic.portfolio_size,
        "exploitation_fraction": topic.exploitation_fraction,
        "candidates": [c.to_dict() for c in result.candidates],
        "shortfall": result.shortfall,
        "shortfall_report": result.shortfall_report,
    }


def portfolio_report(result: PortfolioResult) -> str:
    lines = [
        "| name | text | chars | traced | rationale |",
        "| --- | --- | --- | --- | --- |",
    ]
    for c in result.candidates:
        text = c.text.replace("|", "\\|")
        rationale = c.rationale.replace("|", "\\|")
        lines.append(
            f"| {c.name} | {text} | {c.char_count} | {len(c.traced_claims)} | {rationale} |"
        )
    if result.shortfall:
        lines.append("")
        lines.append(result.shortfall_report)
    return "\n".join(lines)


def candidates_markdown(candidates: Sequence[Mapping[str, Any]]) -> str:
    """Export table from stored candidate dicts; reflects review flags."""
    lines = [
        "| name | text | chars | traced | status |",
        "| --- | --- | --- | --- | --- |",
    ]
    for c in candidates:
        text = str(c.get("text", "")).replace("|", "\\|")
        status = "rejected" if c.get("rejected_by_review") else "active"
        traced = len(c.get("traced_claims", ()))
        lines.append(
            f"| {c.get('name', '')} | {text} | {c.get('char_count', '')} | {traced} | {status} |"
        )
    return "\n".join(lines)
