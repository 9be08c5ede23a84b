"""Typed topic/artifact/provenance vocabulary shared by all pipeline layers.

A *topic* is a typed query addressed to one layer (data, information,
knowledge, wisdom). Its identity is the SHA-256 digest of its canonical
serialization, which is what makes resolved outputs cacheable and
content-addressable. An *artifact* is the stored output of a resolved
topic: a machine-readable payload plus a human-readable report, wrapped
with provenance.

All types here are immutable values; they can be shared freely between
concurrent tasks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Protocol

from .canonical import DIGEST_ALGORITHM, digest_hex

ARTIFACT_FORMAT_VERSION = 1


class InvalidTopic(ValueError):
    """Topic body violates its type invariants."""


class Layer(str, Enum):
    DATA = "data"
    INFORMATION = "information"
    KNOWLEDGE = "knowledge"
    WISDOM = "wisdom"

    @property
    def rank(self) -> int:
        return _LAYER_RANK[self]


_LAYER_RANK = {
    Layer.DATA: 0,
    Layer.INFORMATION: 1,
    Layer.KNOWLEDGE: 2,
    Layer.WISDOM: 3,
}


@dataclass(frozen=True, order=True)
class TopicId:
    """Content-addressed identity of a topic: layer tag + canonical digest."""

    layer: Layer
    hash: str

    @property
    def key(self) -> str:
        return f"{self.layer.value}/{self.hash}"

    def short(self) -> str:
        return f"{self.layer.value}/{self.hash[:12]}"

    def to_dict(self) -> dict[str, str]:
        return {"layer": self.layer.value, "hash": self.hash}

    @classmethod
    def from_dict(cls, d: Mapping[str, str]) -> "TopicId":
        return cls(layer=Layer(d["layer"]), hash=d["hash"])


# ---------------------------------------------------------------------------
# Data layer topics
# ---------------------------------------------------------------------------


class DataKind(str, Enum):
    SCHEMA_VERIFICATION = "schema_verification"
    MISSING_VALUE_MAP = "missing_value_map"
    EXPERIMENT_DIMENSIONING = "experiment_dimensioning"
    ID_UNIQUENESS = "id_uniqueness"
    FORMAT_COMPLIANCE = "format_compliance"
    PROVENANCE = "provenance"
    EXPERIMENT_CONFIG = "experiment_config"


# Per-kind parameter allowlist; anything else is an invalid topic.
DATA_PARAM_ALLOWLIST: dict[DataKind, frozenset[str]] = {
    DataKind.SCHEMA_VERIFICATION: frozenset(),
    DataKind.MISSING_VALUE_MAP: frozenset({"columns"}),
    DataKind.EXPERIMENT_DIMENSIONING: frozenset(),
    DataKind.ID_UNIQUENESS: frozenset({"id_column"}),
    DataKind.FORMAT_COMPLIANCE: frozenset({"limit"}),
    DataKind.PROVENANCE: frozenset({"source", "collected_by", "notes"}),
    DataKind.EXPERIMENT_CONFIG: frozenset({"balance_tolerance"}),
}


@dataclass(frozen=True)
class DataTopic:
    kind: DataKind
    params: tuple[tuple[str, Any], ...] = ()

    layer = Layer.DATA

    @property
    def params_dict(self) -> dict[str, Any]:
        return dict(self.params)

    def validate(self) -> None:
        allowed = DATA_PARAM_ALLOWLIST[self.kind]
        extra = {k for k, _ in self.params} - allowed
        if extra:
            raise InvalidTopic(
                f"params {sorted(extra)} not allowed for data kind {self.kind.value}"
            )

    def to_body(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "params": self.params_dict}

    @classmethod
    def from_body(cls, body: Mapping[str, Any]) -> "DataTopic":
        kind = DataKind(str(body["kind"]).lower())
        params = body.get("params") or {}
        return cls(kind=kind, params=tuple(sorted(params.items())))


# ---------------------------------------------------------------------------
# Information layer topics
# ---------------------------------------------------------------------------


class QueryKind(str, Enum):
    RATE = "rate"
    MEAN = "mean"
    COUNT = "count"
    TWO_PROPORTION_TEST = "two_proportion_test"
    CHI_SQUARE_INDEPENDENCE = "chi_square_independence"
    PEARSON_CORRELATION = "pearson_correlation"
    SEGMENT_BREAKDOWN = "segment_breakdown"
    FUNNEL = "funnel"


class PredicateOp(str, Enum):
    EQ = "eq"
    NEQ = "neq"
    IN = "in"
    LT = "lt"
    LE = "le"
    GT = "gt"
    GE = "ge"
    NOT_NULL = "not_null"


@dataclass(frozen=True)
class Predicate:
    column: str
    op: PredicateOp
    value: Any = None

    def to_body(self) -> dict[str, Any]:
        body: dict[str, Any] = {"column": self.column, "op": self.op.value}
        if self.op is not PredicateOp.NOT_NULL:
            body["value"] = list(self.value) if isinstance(self.value, (list, tuple, set, frozenset)) else self.value
        return body

    @classmethod
    def from_body(cls, body: Mapping[str, Any]) -> "Predicate":
        op = PredicateOp(str(body["op"]).lower())
        value = body.get("value")
        if op is PredicateOp.IN and value is not None:
            value = tuple(value)
        return cls(column=body["column"], op=op, value=value)


@dataclass(frozen=True)
class SliceSpec:
    """Conjunction of row predicates; an empty list selects the full table."""

    predicates: tuple[Predicate, ...] = ()

    def to_body(self) -> dict[str, Any]:
        return {"predicates": [p.to_body() for p in self.predicates]}

    @classmethod
    def from_body(cls, body: Mapping[str, Any] | None) -> "SliceSpec":
        if not body:
            return cls()
        return cls(predicates=tuple(Predicate.from_body(p) for p in body.get("predicates", ())))

    def extended(self, *extra: Predicate) -> "SliceSpec":
        return SliceSpec(predicates=self.predicates + tuple(extra))

    def describe(self) -> str:
        if not self.predicates:
            return "full table"
        parts = []
        for p in self.predicates:
            if p.op is PredicateOp.NOT_NULL:
                parts.append(f"{p.column} not null")
            else:
                parts.append(f"{p.column} {p.op.value} {p.value!r}")
        return " and ".join(parts)


@dataclass(frozen=True)
class AgeBin:
    label: str
    low: int
    high: int | None  # inclusive; None = open-ended

    def to_body(self) -> dict[str, Any]:
        return {"label": self.label, "low": self.low, "high": self.high}

    @classmethod
    def from_body(cls, body: Mapping[str, Any]) -> "AgeBin":
        return cls(label=body["label"], low=int(body["low"]), high=None if body.get("high") is None else int(body["high"]))


@dataclass(frozen=True)
class ContextSpec:
    """Framing conditions for an information query.

    Only the fields a given query kind needs are set: group definitions for
    tests and breakdowns, a second subject for correlations, a time window
    and units for documentation, age bins when the default banding is not
    wanted.
    """

    time_window: tuple[str, str] | None = None
    units: str | None = None
    group_column: str | None = None
    group_a: str | None = None
    group_b: str | None = None
    subject2: str | None = None
    age_bins: tuple[AgeBin, ...] | None = None
    label: str | None = None

    def to_body(self) -> dict[str, Any]:
        body: dict[str, Any] = {}
        if self.time_window is not None:
            body["time_window"] = list(self.time_window)
        for name in ("units", "group_column", "group_a", "group_b", "subject2", "label"):
            value = getattr(self, name)
            if value is not None:
                body[name] = value
        if self.age_bins is not None:
            body["age_bins"] = [b.to_body() for b in self.age_bins]
        return body

    @classmethod
    def from_body(cls, body: Mapping[str, Any] | None) -> "ContextSpec":
        if not body:
            return cls()
        tw = body.get("time_window")
        bins = body.get("age_bins")
        return cls(
            time_window=(tw[0], tw[1]) if tw else None,
            units=body.get("units"),
            group_column=body.get("group_column"),
            group_a=body.get("group_a"),
            group_b=body.get("group_b"),
            subject2=body.get("subject2"),
            age_bins=tuple(AgeBin.from_body(b) for b in bins) if bins else None,
            label=body.get("label"),
        )


@dataclass(frozen=True)
class InfoTopic:
    slice: SliceSpec
    context: ContextSpec
    subject: str
    query: QueryKind

    layer = Layer.INFORMATION

    def validate(self) -> None:
        if not self.subject:
            raise InvalidTopic("info topic requires a subject")
        if self.query in (QueryKind.TWO_PROPORTION_TEST, QueryKind.CHI_SQUARE_INDEPENDENCE):
            if not self.context.group_column:
                raise InvalidTopic(f"{self.query.value} requires context.group_column")
        if self.query is QueryKind.TWO_PROPORTION_TEST:
            if self.context.group_a is None or self.context.group_b is None:
                raise InvalidTopic("two_proportion_test requires context.group_a and group_b")
        if self.query is QueryKind.PEARSON_CORRELATION and not self.context.subject2:
            raise InvalidTopic("pearson_correlation requires context.subject2")
        if self.query is QueryKind.SEGMENT_BREAKDOWN and not self.context.group_column:
            raise InvalidTopic("segment_breakdown requires context.group_column")

    def to_body(self) -> dict[str, Any]:
        return {
            "slice": self.slice.to_body(),
            "context": self.context.to_body(),
            "subject": self.subject,
            "query": self.query.value,
        }

    @classmethod
    def from_body(cls, body: Mapping[str, Any]) -> "InfoTopic":
        return cls(
            slice=SliceSpec.from_body(body.get("slice")),
            context=ContextSpec.from_body(body.get("context")),
            subject=body["subject"],
            query=QueryKind(str(body["query"]).lower()),
        )


# ---------------------------------------------------------------------------
# Knowledge layer topics
# ---------------------------------------------------------------------------


class Relation(str, Enum):
    OUTPERFORMS = "outperforms"
    INCREASES = "increases"
    DECREASES = "decreases"
    NO_EFFECT = "no_effect"


class DescriptorKind(str, Enum):
    TAG = "tag"  # message strategy tag; matches catalog entries carrying it
    VARIANT = "variant"  # a single named catalog entry
    SEGMENT = "segment"  # a column=value patient segment


@dataclass(frozen=True)
class Descriptor:
    kind: DescriptorKind
    value: str
    column: str | None = None  # segment descriptors only

    def validate(self) -> None:
        if not self.value:
            raise InvalidTopic("descriptor requires a value")
        if self.kind is DescriptorKind.SEGMENT and not self.column:
            raise InvalidTopic("segment descriptor requires a column")
        if self.kind is not DescriptorKind.SEGMENT and self.column:
            raise InvalidTopic(f"{self.kind.value} descriptor must not set a column")

    def to_body(self) -> dict[str, Any]:
        body: dict[str, Any] = {"kind": self.kind.value, "value": self.value}
        if self.column is not None:
            body["column"] = self.column
        return body

    @classmethod
    def from_body(cls, body: Mapping[str, Any]) -> "Descriptor":
        return cls(
            kind=DescriptorKind(str(body["kind"]).lower()),
            value=str(body["value"]).lower() if body.get("kind") == "tag" else str(body["value"]),
            column=body.get("column"),
        )

    def describe(self) -> str:
        if self.kind is DescriptorKind.SEGMENT:
            return f"segment {self.column}={self.value}"
        return f"{self.kind.value} {self.value}"


class EvidenceTemplate(str, Enum):
    PAIRWISE_TESTS = "pairwise_tests"
    PER_SIDE_RATES = "per_side_rates"


@dataclass(frozen=True)
class Hypothesis:
    left: Descriptor
    relation: Relation
    right: Descriptor
    metric: str = "clicked"
    condition: SliceSpec = SliceSpec()

    def validate(self) -> None:
        self.left.validate()
        self.right.validate()
        if self.left == self.right:
            raise InvalidTopic("hypothesis requires distinct left and right descriptors")
        if not self.metric:
            raise InvalidTopic("hypothesis requires a metric column")

    def to_body(self) -> dict[str, Any]:
        return {
            "left": self.left.to_body(),
            "relation": self.relation.value,
            "right": self.right.to_body(),
            "metric": self.metric,
            "condition": self.condition.to_body(),
        }

    @classmethod
    def from_body(cls, body: Mapping[str, Any]) -> "Hypothesis":
        return cls(
            left=Descriptor.from_body(body["left"]),
            relation=Relation(str(body["relation"]).lower()),
            right=Descriptor.from_body(body["right"]),
            metric=body.get("metric", "clicked"),
            condition=SliceSpec.from_body(body.get("condition")),
        )

    def describe(self) -> str:
        return f"{self.left.describe()} {self.relation.value} {self.right.describe()} on {self.metric}"


@dataclass(frozen=True)
class KnowledgeTopic:
    claim: Hypothesis
    required_evidence: tuple[EvidenceTemplate | InfoTopic, ...] = ()

    layer = Layer.KNOWLEDGE

    def validate(self) -> None:
        self.claim.validate()
        for item in self.required_evidence:
            if isinstance(item, InfoTopic):
                item.validate()

    def to_body(self) -> dict[str, Any]:
        evidence: list[Any] = []
        for item in self.required_evidence:
            if isinstance(item, EvidenceTemplate):
                evidence.append(item.value)
            else:
                evidence.append({"topic": item.to_body()})
        return {"claim": self.claim.to_body(), "required_evidence": evidence}

    @classmethod
    def from_body(cls, body: Mapping[str, Any]) -> "KnowledgeTopic":
        evidence: list[EvidenceTemplate | InfoTopic] = []
        for item in body.get("required_evidence", ()):
            if isinstance(item, str):
                evidence.append(EvidenceTemplate(item.lower()))
            else:
                evidence.append(InfoTopic.from_body(item["topic"]))
        return cls(claim=Hypothesis.from_body(body["claim"]), required_evidence=tuple(evidence))


# ---------------------------------------------------------------------------
# Wisdom layer topics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WisdomTopic:
    objective: str
    portfolio_size: int = 20
    exploitation_fraction: float = 0.75
    target_segment: ContextSpec | None = None  # None = universal
    constraints: str = "default"  # named constraint set

    layer = Layer.WISDOM

    def validate(self) -> None:
        if not self.objective:
            raise InvalidTopic("wisdom topic requires an objective")
        if self.portfolio_size < 1:
            raise InvalidTopic("portfolio_size must be >= 1")
        if not 0.0 <= self.exploitation_fraction <= 1.0:
            raise InvalidTopic("exploitation_fraction must lie in [0, 1]")

    def to_body(self) -> dict[str, Any]:
        return {
            "objective": self.objective,
            "portfolio_size": self.portfolio_size,
            "exploitation_fraction": float(self.exploitation_fraction),
            "target_segment": self.target_segment.to_body() if self.target_segment else "universal",
            "constraints": self.constraints,
        }

    @classmethod
    def from_body(cls, body: Mapping[str, Any]) -> "WisdomTopic":
        segment = body.get("target_segment", "universal")
        return cls(
            objective=body["objective"],
            portfolio_size=int(body.get("portfolio_size", 20)),
            exploitation_fraction=float(body.get("exploitation_fraction", 0.75)),
            target_segment=None if segment == "universal" else ContextSpec.from_body(segment),
            constraints=body.get("constraints", "default"),
        )


Topic = DataTopic | InfoTopic | KnowledgeTopic | WisdomTopic

_TOPIC_TYPES: dict[Layer, type] = {
    Layer.DATA: DataTopic,
    Layer.INFORMATION: InfoTopic,
    Layer.KNOWLEDGE: KnowledgeTopic,
    Layer.WISDOM: WisdomTopic,
}


def topic_wire(topic: Topic) -> dict[str, Any]:
    """Wire form of a topic: its body plus the layer tag."""
    return {"layer": topic.layer.value, **topic.to_body()}


def parse_topic(wire: Mapping[str, Any]) -> Topic:
    layer = Layer(str(wire["layer"]).lower())
    body = {k: v for k, v in wire.items() if k != "layer"}
    topic = _TOPIC_TYPES[layer].from_body(body)
    topic.validate()
    return topic


def canonical_hash(topic: Topic) -> TopicId:
    """Deterministic content-addressed identity for a topic body.

    Raises InvalidTopic when the body violates its type invariants; equal
    bodies (after canonicalization) always map to equal ids.
    """
    if isinstance(topic, (DataTopic, InfoTopic, KnowledgeTopic, WisdomTopic)):
        if hasattr(topic, "validate"):
            topic.validate()
    else:
        raise InvalidTopic(f"not a topic: {type(topic).__name__}")
    return TopicId(layer=topic.layer, hash=digest_hex(topic_wire(topic)))


# ---------------------------------------------------------------------------
# Artifacts and provenance
# ---------------------------------------------------------------------------


class ReviewActionKind(str, Enum):
    APPROVE = "approve"
    REJECT = "reject"
    EDIT = "edit"


@dataclass(frozen=True)
class HumanAction:
    actor: str
    action: ReviewActionKind
    timestamp: str  # RFC 3339, UTC
    comment: str = ""

    def to_dict(self) -> dict[str, str]:
        return {
            "actor": self.actor,
            "action": self.action.value,
            "timestamp": self.timestamp,
            "comment": self.comment,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, str]) -> "HumanAction":
        return cls(
            actor=d["actor"],
            action=ReviewActionKind(d["action"]),
            timestamp=d["timestamp"],
            comment=d.get("comment", ""),
        )


@dataclass(frozen=True)
class Provenance:
    input_artifact_ids: tuple[TopicId, ...] = ()
    dataset_fingerprint: str = ""
    agent_version: str = ""
    llm_exchange_ids: tuple[str, ...] = ()
    human_actions: tuple[HumanAction, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_artifact_ids": [t.to_dict() for t in self.input_artifact_ids],
            "dataset_fingerprint": self.dataset_fingerprint,
            "agent_version": self.agent_version,
            "llm_exchange_ids": list(self.llm_exchange_ids),
            "human_actions": [a.to_dict() for a in self.human_actions],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Provenance":
        return cls(
            input_artifact_ids=tuple(TopicId.from_dict(t) for t in d.get("input_artifact_ids", ())),
            dataset_fingerprint=d.get("dataset_fingerprint", ""),
            agent_version=d.get("agent_version", ""),
            llm_exchange_ids=tuple(d.get("llm_exchange_ids", ())),
            human_actions=tuple(HumanAction.from_dict(a) for a in d.get("human_actions", ())),
        )

    def with_actions(self, actions: Iterable[HumanAction]) -> "Provenance":
        return Provenance(
            input_artifact_ids=self.input_artifact_ids,
            dataset_fingerprint=self.dataset_fingerprint,
            agent_version=self.agent_version,
            llm_exchange_ids=self.llm_exchange_ids,
            human_actions=self.human_actions + tuple(actions),
        )


@dataclass(frozen=True)
class Artifact:
    topic_id: TopicId
    payload: Mapping[str, Any]
    report: str
    provenance: Provenance
    created_at: str  # RFC 3339, UTC

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "format_version": ARTIFACT_FORMAT_VERSION,
            "digest_algorithm": DIGEST_ALGORITHM,
            "topic_id": self.topic_id.to_dict(),
            "payload": dict(self.payload),
            "report": self.report,
            "provenance": self.provenance.to_dict(),
            "created_at": self.created_at,
        }

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "Artifact":
        return cls(
            topic_id=TopicId.from_dict(d["topic_id"]),
            payload=d.get("payload", {}),
            report=d.get("report", ""),
            provenance=Provenance.from_dict(d.get("provenance", {})),
            created_at=d.get("created_at", ""),
        )


class StoreReadView(Protocol):
    """Read access to the artifact store, as validation needs it."""

    def exists(self, topic_id: TopicId) -> bool: ...


def validate_artifact(artifact: Artifact, store: StoreReadView | None = None) -> list[str]:
    """Check artifact invariants; returns a list of violations (empty = ok).

    Total function: never raises for malformed artifacts, it reports them.
    """
    violations: list[str] = []
    if not artifact.payload:
        violations.append("empty payload")
    if not artifact.report:
        violations.append("empty report")
    payload_layer = artifact.payload.get("layer") if isinstance(artifact.payload, Mapping) else None
    if payload_layer != artifact.topic_id.layer.value:
        violations.append(
            f"layer mismatch: topic_id.layer={artifact.topic_id.layer.value} "
            f"payload.layer={payload_layer}"
        )
    for input_id in artifact.provenance.input_artifact_ids:
        if input_id.layer.rank > artifact.topic_id.layer.rank:
            violations.append(
                f"provenance input {input_id.short()} comes from a higher layer"
            )
        if store is not None and not store.exists(input_id):
            violations.append(f"dangling provenance: {input_id.short()} not in store")
    return violations
