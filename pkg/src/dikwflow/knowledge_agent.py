"""Knowledge agent: scores hypotheses against resolved information artifacts.

A knowledge topic names a directional hypothesis and the evidence needed to
judge it. This module expands evidence templates into concrete information
topics, resolves whichever are not already cached, and combines the resolved
statistics into a support score in [0, 1] with 0.5 meaning "no signal".

The theoretical rationale is advisory text from the language-model adapter;
it is stored alongside the score but never feeds into it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Mapping, Sequence

from .artifacts import (
    Artifact,
    ContextSpec,
    Descriptor,
    DescriptorKind,
    EvidenceTemplate,
    Hypothesis,
    InfoTopic,
    KnowledgeTopic,
    Layer,
    Predicate,
    PredicateOp,
    Provenance,
    QueryKind,
    Relation,
    SliceSpec,
    TopicId,
    canonical_hash,
)
from .dataset import MessageCatalog
from .info_agent import StatResult
from .llm import CompletionRequest, LlmAdapter, LlmMode
from .store import ArtifactStore

AGENT_VERSION = "knowledge-agent/1"

# Cutpoints for mapping a support score onto a confidence band.
HIGH_BAND_FLOOR = 0.8
MEDIUM_BAND_FLOOR = 0.6

# A no-effect hypothesis counts a test as consistent when the test fails to
# reject at this level.
NO_EFFECT_ALPHA = 0.05

VARIANT_COLUMN = "variant"


class UnresolvableDescriptor(ValueError):
    """A hypothesis side matches nothing testable in the catalog."""


class EvidenceResolutionFailure(RuntimeError):
    """An evidence topic could not be resolved; carries the causal chain."""

    def __init__(self, topic: InfoTopic, cause: Exception) -> None:
        super().__init__(f"evidence topic failed ({topic.query.value} on {topic.subject}): {cause}")
        self.topic = topic
        self.cause = cause


class RationaleSource(str, Enum):
    LLM = "llm"
    MANUAL = "manual"
    CANNED = "canned"


class ConfidenceBand(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


def confidence_band(score: float) -> ConfidenceBand:
    if score >= HIGH_BAND_FLOOR:
        return ConfidenceBand.HIGH
    if score >= MEDIUM_BAND_FLOOR:
        return ConfidenceBand.MEDIUM
    return ConfidenceBand.LOW


# ---------------------------------------------------------------------------
# Evidence expansion
# ---------------------------------------------------------------------------


def match_variants(descriptor: Descriptor, catalog: MessageCatalog) -> tuple[str, ...]:
    """Catalog message names a tag or variant descriptor denotes, sorted."""
    if descriptor.kind is DescriptorKind.VARIANT:
        if descriptor.value not in catalog.names():
            raise UnresolvableDescriptor(f"variant {descriptor.value!r} not in catalog")
        return (descriptor.value,)
    if descriptor.kind is DescriptorKind.TAG:
        names = sorted(
            e.name for e in catalog.entries if descriptor.value in {t.value for t in e.strategy_tags}
        )
        if not names:
            raise UnresolvableDescriptor(f"tag {descriptor.value!r} matches no catalog entry")
        return tuple(names)
    raise UnresolvableDescriptor(f"{descriptor.kind.value} descriptor does not denote variants")


def _variant_side_slice(base: SliceSpec, names: tuple[str, ...]) -> SliceSpec:
    if len(names) == 1:
        return base.extended(Predicate(VARIANT_COLUMN, PredicateOp.EQ, names[0]))
    return base.extended(Predicate(VARIANT_COLUMN, PredicateOp.IN, names))


def _expand_pairwise(hyp: Hypothesis, catalog: MessageCatalog) -> list[InfoTopic]:
    left, right = hyp.left, hyp.right
    if DescriptorKind.SEGMENT in (left.kind, right.kind):
        if left.kind is not right.kind or left.column != right.column:
            raise UnresolvableDescriptor(
                "segment comparison requires both sides on the same column"
            )
        return [
            InfoTopic(
                slice=hyp.condition,
                context=ContextSpec(
                    group_column=left.column, group_a=left.value, group_b=right.value
                ),
                subject=hyp.metric,
                query=QueryKind.TWO_PROPORTION_TEST,
            )
        ]
    pairs = [
        (lv, rv)
        for lv in match_variants(left, catalog)
        for rv in match_variants(right, catalog)
        if lv != rv
    ]
    if not pairs:
        raise UnresolvableDescriptor(
            f"{left.describe()} and {right.describe()} share every matching variant"
        )
    return [
        InfoTopic(
            slice=hyp.condition,
            context=ContextSpec(group_column=VARIANT_COLUMN, group_a=lv, group_b=rv),
            subject=hyp.metric,
            query=QueryKind.TWO_PROPORTION_TEST,
        )
        for lv, rv in sorted(pairs)
    ]


def _expand_rates(hyp: Hypothesis, catalog: MessageCatalog) -> list[InfoTopic]:
    topics = []
    for side in (hyp.left, hyp.right):
        if side.kind is DescriptorKind.SEGMENT:
            side_slice = hyp.condition.extended(
                Predicate(side.column, PredicateOp.EQ, side.value)
            )
        else:
            side_slice = _variant_side_slice(hyp.condition, match_variants(side, catalog))
        topics.append(
            InfoTopic(
                slice=side_slice,
                context=ContextSpec(label=side.describe()),
                subject=hyp.metric,
                query=QueryKind.RATE,
            )
        )
    return topics


def required_evidence(topic: KnowledgeTopic, catalog: MessageCatalog) -> list[InfoTopic]:
    """Deterministic expansion of a knowledge topic's evidence requirements."""
    topic.validate()
    expanded: list[InfoTopic] = []
    for item in topic.required_evidence:
        if isinstance(item, InfoTopic):
            expanded.append(item)
        elif item is EvidenceTemplate.PAIRWISE_TESTS:
            expanded.extend(_expand_pairwise(topic.claim, catalog))
        elif item is EvidenceTemplate.PER_SIDE_RATES:
            expanded.extend(_expand_rates(topic.claim, catalog))
        else:  # pragma: no cover - enum is closed
            raise UnresolvableDescriptor(f"unknown evidence template {item!r}")
    seen: set[str] = set()
    unique: list[InfoTopic] = []
    for info in expanded:
        key = canonical_hash(info).hash
        if key not in seen:
            seen.add(key)
            unique.append(info)
    return unique


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

# Queries whose results carry a sign relative to a directional hypothesis.
_DIRECTIONAL_QUERIES = {QueryKind.TWO_PROPORTION_TEST, QueryKind.PEARSON_CORRELATION}
# Queries that speak to association strength and hence to no-effect claims.
_ASSOCIATION_QUERIES = _DIRECTIONAL_QUERIES | {QueryKind.CHI_SQUARE_INDEPENDENCE}


@dataclass(frozen=True)
class EvidenceItem:
    """One resolved statistic, judged against the hypothesis direction.

    weight reproduces the scoring contribution from stored fields: 1 - p when
    a p-value exists, else the standardized effect's magnitude capped at 1,
    and 0 for evidence that carries no directional information.
    """

    artifact_id: TopicId
    direction_match: bool
    p_value: float | None
    effect: float
    test_statistic: float | None = None
    weight: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "artifact_id": self.artifact_id.to_dict(),
            "direction_match": self.direction_match,
            "p_value": self.p_value,
            "effect": self.effect,
            "test_statistic": self.test_statistic,
            "weight": self.weight,
        }


def _clamp01(x: float) -> float:
    return max(0.0, min(1.0, x))


def judge_result(relation: Relation, result: StatResult) -> tuple[bool, float, float]:
    """(direction_match, effect, weight) of one statistic for a relation."""
    directional = result.query in _DIRECTIONAL_QUERIES
    relevant = result.query in (
        _ASSOCIATION_QUERIES if relation is Relation.NO_EFFECT else _DIRECTIONAL_QUERIES
    )
    effect = float(result.estimate) if directional and result.estimate is not None else 0.0
    if not relevant:
        return True, effect, 0.0

    if relation is Relation.NO_EFFECT:
        match = result.p_value is None or result.p_value >= NO_EFFECT_ALPHA
    elif relation is Relation.DECREASES:
        match = effect < 0.0
    else:  # outperforms / increases: left side ahead
        match = effect > 0.0

    if result.p_value is not None:
        weight = _clamp01(1.0 - result.p_value)
    elif result.test_statistic is not None:
        weight = min(abs(result.test_statistic), 1.0)
    else:
        weight = 0.0
    return match, effect, weight


@dataclass(frozen=True)
class Support:
    score: float
    neutral: bool  # True when no evidence carried weight

    @property
    def band(self) -> ConfidenceBand:
        return confidence_band(self.score)


def combine(items: Sequence[EvidenceItem]) -> Support:
    total = sum(item.weight for item in items)
    if total <= 0.0:
        return Support(score=0.5, neutral=True)
    raw = sum(item.weight * (1.0 if item.direction_match else -1.0) for item in items) / total
    return Support(score=_clamp01((1.0 + raw) / 2.0), neutral=False)


def empirical_support(topic: KnowledgeTopic, results: Sequence[StatResult]) -> Support:
    """Support score for a hypothesis over already-resolved statistics."""
    relation = topic.claim.relation
    items = []
    for result in results:
        match, effect, weight = judge_result(relation, result)
        items.append(
            EvidenceItem(
                artifact_id=TopicId(layer=Layer.INFORMATION, hash="unstored"),
                direction_match=match,
                p_value=result.p_value,
                effect=effect,
                test_statistic=result.test_statistic,
                weight=weight,
            )
        )
    return combine(items)


# ---------------------------------------------------------------------------
# Claim assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KnowledgeClaim:
    topic: KnowledgeTopic
    theoretical_rationale: str
    rationale_source: RationaleSource
    evidence: tuple[EvidenceItem, ...]
    support_score: float
    confidence_band: ConfidenceBand
    generalizability_notes: str
    flags: tuple[str, ...] = ()
    llm_exchange_ids: tuple[str, ...] = ()

    def evidence_ids(self) -> tuple[TopicId, ...]:
        return tuple(item.artifact_id for item in self.evidence)

    def to_payload(self) -> dict[str, Any]:
        return {
            "layer": Layer.KNOWLEDGE.value,
            "claim": self.topic.claim.to_body(),
            "theoretical_rationale": self.theoretical_rationale,
            "rationale_source": self.rationale_source.value,
            "evidence": [item.to_dict() for item in self.evidence],
            "support_score": self.support_score,
            "confidence_band": self.confidence_band.value,
            "generalizability_notes": self.generalizability_notes,
            "flags": list(self.flags),
        }

    def report(self) -> str:
        lines = [
            f"hypothesis: {self.topic.claim.describe()}",
            f"support score: {self.support_score:.4f} ({self.confidence_band.value})",
            f"evidence items: {len(self.evidence)}",
        ]
        for item in self.evidence:
            direction = "matches" if item.direction_match else "contradicts"
            p_text = "p n/a" if item.p_value is None else f"p={item.p_value:.6g}"
            lines.append(
                f"  {item.artifact_id.short()}: {direction} claimed direction, "
                f"effect={item.effect:.4f}, {p_text}, weight={item.weight:.4f}"
            )
        for flag in self.flags:
            lines.append(f"flag: {flag}")
        return "\n".join(lines)


def _rationale_for(
    topic: KnowledgeTopic, llm: LlmAdapter
) -> tuple[str, RationaleSource, tuple[str, ...]]:
    request = CompletionRequest(layer=Layer.KNOWLEDGE, user_content=topic.claim.describe())
    text, exchange_id = llm.complete(request)
    source = RationaleSource.CANNED if llm.mode is LlmMode.CANNED else RationaleSource.LLM
    return text, source, (exchange_id,)


def _generalizability_notes(topic: KnowledgeTopic, evidence_count: int) -> str:
    scope = topic.claim.condition.describe()
    return (
        f"Assessed on one dataset, slice: {scope}; {evidence_count} evidence item(s). "
        "Transfer beyond this population is untested."
    )


def evaluate_hypothesis(
    topic: KnowledgeTopic,
    catalog: MessageCatalog,
    store: ArtifactStore,
    info_resolver: Callable[[InfoTopic], Artifact],
    llm: LlmAdapter,
) -> KnowledgeClaim:
    """Resolve missing evidence, score the hypothesis, attach the rationale.

    Evidence already in the store is reused; the resolver is called only for
    the gaps, and its artifacts are published back so concurrent evaluations
    converge on one copy.
    """
    needed = required_evidence(topic, catalog)
    resolved: list[tuple[InfoTopic, Artifact]] = []
    for info in needed:
        info_id = canonical_hash(info)
        artifact = store.get(info_id)
        if artifact is None:
            try:
                artifact = info_resolver(info)
            except Exception as exc:
                raise EvidenceResolutionFailure(info, exc) from exc
            artifact = store.publish(artifact).artifact
        resolved.append((info, artifact))

    relation = topic.claim.relation
    items = []
    for info, artifact in resolved:
        result = _result_from_payload(artifact.payload)
        match, effect, weight = judge_result(relation, result)
        items.append(
            EvidenceItem(
                artifact_id=artifact.topic_id,
                direction_match=match,
                p_value=result.p_value,
                effect=effect,
                test_statistic=result.test_statistic,
                weight=weight,
            )
        )
    support = combine(items)
    rationale, source, exchange_ids = _rationale_for(topic, llm)
    return KnowledgeClaim(
        topic=topic,
        theoretical_rationale=rationale,
        rationale_source=source,
        evidence=tuple(items),
        support_score=support.score,
        confidence_band=support.band,
        generalizability_notes=_generalizability_notes(topic, len(items)),
        flags=("neutral",) if support.neutral else (),
        llm_exchange_ids=exchange_ids,
    )


def _result_from_payload(payload: Mapping[str, Any]) -> StatResult:
    body = payload.get("result", {})
    return StatResult(
        query=QueryKind(body["query"]),
        estimate=body.get("estimate"),
        n=int(body.get("n", 0)),
        k=body.get("k"),
        ci_low=body.get("ci_low"),
        ci_high=body.get("ci_high"),
        ci_level=body.get("ci_level"),
        test_statistic=body.get("test_statistic"),
        p_value=body.get("p_value"),
        dof=body.get("dof"),
        group_results=tuple(body["group_results"]) if body.get("group_results") else None,
        flags=tuple(body.get("flags", ())),
    )


def claim_provenance(claim: KnowledgeClaim, dataset_fingerprint: str) -> Provenance:
    return Provenance(
        input_artifact_ids=tuple(sorted(claim.evidence_ids())),
        dataset_fingerprint=dataset_fingerprint,
        agent_version=AGENT_VERSION,
        llm_exchange_ids=claim.llm_exchange_ids,
        human_actions=(),
    )
