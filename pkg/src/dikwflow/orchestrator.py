"""Run engine: topic lifecycle, dependency scheduling, caching, review gates.

One engine instance owns one run. All state mutation happens on the caller's
thread through a serialized command stream (submit, step, review); agent
executions are pure functions of the dataset plus already-resolved artifacts
and run concurrently up to the configured parallelism. Artifact publication
goes through the content-addressed store, which makes reruns cache hits
rather than recomputation.

Run state survives crashes: ``runs/<run-id>/state.json`` is rewritten
atomically after every scheduling wave and review action, and every human
action is appended to ``runs/<run-id>/actions.log`` as one JSON line.
"""

from __future__ import annotations

import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from .artifacts import (
    Artifact,
    HumanAction,
    InfoTopic,
    KnowledgeTopic,
    Layer,
    Provenance,
    ReviewActionKind,
    Topic,
    TopicId,
    WisdomTopic,
    canonical_hash,
    parse_topic,
    topic_wire,
)
from .canonical import digest_hex
from .data_agent import resolve_data_topic
from .dataset import EncounterTable, MessageCatalog, builtin_catalog, fingerprint, ingest, load_catalog
from .info_agent import resolve_info_topic
from .knowledge_agent import (
    KnowledgeClaim,
    ConfidenceBand,
    EvidenceItem,
    RationaleSource,
    claim_provenance,
    evaluate_hypothesis,
    required_evidence,
)
from .llm import LlmAdapter, LlmMode
from .store import ArtifactStore, NondeterminismAlarm
from .wisdom_agent import (
    generate_portfolio,
    portfolio_payload,
    portfolio_report,
)

ENGINE_VERSION = "engine/1"
AGENT_VERSIONS = {
    Layer.DATA: "data-agent/1",
    Layer.INFORMATION: "information-agent/1",
    Layer.KNOWLEDGE: "knowledge-agent/1",
    Layer.WISDOM: "wisdom-agent/1",
}

# Base of the logical clock used in hermetic modes so reruns are byte-identical.
LOGICAL_CLOCK_BASE = datetime(2025, 1, 1, tzinfo=timezone.utc)


class OrchestratorError(Exception):
    pass


class InvalidState(OrchestratorError):
    """A review action targeted a topic in the wrong status."""


class UnknownTopic(OrchestratorError, KeyError):
    pass


class TopicStatus(str, Enum):
    PENDING = "pending"
    AWAITING_APPROVAL = "awaiting_approval"
    READY = "ready"
    RUNNING = "running"
    RESOLVED = "resolved"
    FAILED = "failed"
    REJECTED = "rejected"


TERMINAL_STATUSES = {TopicStatus.RESOLVED, TopicStatus.FAILED, TopicStatus.REJECTED}

_ALLOWED_TRANSITIONS: dict[TopicStatus, set[TopicStatus]] = {
    TopicStatus.PENDING: {TopicStatus.AWAITING_APPROVAL, TopicStatus.READY, TopicStatus.FAILED},
    TopicStatus.AWAITING_APPROVAL: {
        TopicStatus.READY,
        TopicStatus.REJECTED,
        TopicStatus.FAILED,
    },
    TopicStatus.READY: {TopicStatus.RUNNING, TopicStatus.FAILED},
    TopicStatus.RUNNING: {TopicStatus.RESOLVED, TopicStatus.FAILED},
    TopicStatus.RESOLVED: set(),
    TopicStatus.FAILED: set(),
    TopicStatus.REJECTED: set(),
}


def check_transition(current: TopicStatus, target: TopicStatus) -> None:
    if target not in _ALLOWED_TRANSITIONS[current]:
        raise InvalidState(f"illegal transition {current.value} -> {target.value}")


DEFAULT_REVIEW_GATES: dict[Layer, bool] = {
    Layer.DATA: False,
    Layer.INFORMATION: False,
    Layer.KNOWLEDGE: True,
    Layer.WISDOM: True,
}


@dataclass(frozen=True)
class RunConfig:
    dataset_path: str
    catalog_ref: str  # builtin stage name or a JSON file path
    seeds: tuple[Topic, ...]
    review_gates: Mapping[Layer, bool] = field(default_factory=lambda: dict(DEFAULT_REVIEW_GATES))
    max_parallelism: int = 4
    llm_mode: LlmMode = LlmMode.CANNED
    llm_cassette_dir: str | None = None

    def validate(self) -> None:
        if self.max_parallelism < 1:
            raise ValueError("max_parallelism must be >= 1")

    def gate_for(self, layer: Layer) -> bool:
        return bool(self.review_gates.get(layer, DEFAULT_REVIEW_GATES[layer]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset_path": self.dataset_path,
            "catalog_ref": self.catalog_ref,
            "seeds": [topic_wire(t) for t in self.seeds],
            "review_gates": {
                layer.value: self.gate_for(layer) for layer in Layer
            },
            "max_parallelism": self.max_parallelism,
            "llm_mode": self.llm_mode.value,
            "llm_cassette_dir": self.llm_cassette_dir,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunConfig":
        return cls(
            dataset_path=d["dataset_path"],
            catalog_ref=d["catalog_ref"],
            seeds=tuple(parse_topic(w) for w in d.get("seeds", ())),
            review_gates={Layer(k): bool(v) for k, v in d.get("review_gates", {}).items()},
            max_parallelism=int(d.get("max_parallelism", 4)),
            llm_mode=LlmMode(d.get("llm_mode", "canned")),
            llm_cassette_dir=d.get("llm_cassette_dir"),
        )


@dataclass
class TopicRecord:
    topic: Topic
    topic_id: TopicId
    status: TopicStatus
    deps: tuple[TopicId, ...] = ()
    spawned_by: TopicId | None = None
    error: str | None = None
    pending_actions: list[HumanAction] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "topic": topic_wire(self.topic),
            "topic_id": self.topic_id.to_dict(),
            "status": self.status.value,
            "deps": [d.to_dict() for d in self.deps],
            "spawned_by": self.spawned_by.to_dict() if self.spawned_by else None,
            "error": self.error,
            "pending_actions": [a.to_dict() for a in self.pending_actions],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TopicRecord":
        return cls(
            topic=parse_topic(d["topic"]),
            topic_id=TopicId.from_dict(d["topic_id"]),
            status=TopicStatus(d["status"]),
            deps=tuple(TopicId.from_dict(x) for x in d.get("deps", ())),
            spawned_by=TopicId.from_dict(d["spawned_by"]) if d.get("spawned_by") else None,
            error=d.get("error"),
            pending_actions=[HumanAction.from_dict(a) for a in d.get("pending_actions", ())],
        )

    def summary(self) -> str:
        t = self.topic
        if isinstance(t, KnowledgeTopic):
            return t.claim.describe()
        if isinstance(t, WisdomTopic):
            return f"portfolio of {t.portfolio_size} for: {t.objective}"
        if isinstance(t, InfoTopic):
            return f"{t.query.value} of {t.subject} over {t.slice.describe()}"
        return f"{t.kind.value} check"


def _strict_resolver(info: InfoTopic) -> Artifact:
    raise RuntimeError(
        "evidence must already be resolved as a dependency; "
        f"missing {info.query.value} on {info.subject}"
    )


class Engine:
    """Single-run scheduler over the shared artifact store."""

    def __init__(
        self,
        runs_root: str | Path,
        store_root: str | Path,
        config: RunConfig | None = None,
        run_id: str | None = None,
    ) -> None:
        self.runs_root = Path(runs_root)
        self.store_root = Path(store_root)
        if config is None:
            raise ValueError("config required; use Engine.load to resume by run id")
        config.validate()
        self.config = config
        self.table, self.catalog = _load_inputs(config)
        self.fingerprint = fingerprint(self.table).digest
        self.run_id = run_id or ("run-" + digest_hex(
            {"config": config.to_dict(), "fingerprint": self.fingerprint}
        )[:12])
        self.run_dir = self.runs_root / self.run_id
        self.store = ArtifactStore(self.store_root, self.fingerprint)
        self.llm = self._make_llm(config)
        self.records: dict[str, TopicRecord] = {}
        self._publish_seq = 0
        self._action_seq = 0
        self.peak_concurrency = 0
        self._active = 0
        self._conc_lock = threading.Lock()
        self.trace: list[dict[str, Any]] = []
        if (self.run_dir / "state.json").exists():
            self._restore(json.loads((self.run_dir / "state.json").read_text(encoding="utf-8")))
        else:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            self._submit()

    # -- construction helpers ------------------------------------------------

    @classmethod
    def load(cls, runs_root: str | Path, store_root: str | Path, run_id: str) -> "Engine":
        state_path = Path(runs_root) / run_id / "state.json"
        if not state_path.exists():
            raise UnknownTopic(f"no run state at {state_path}")
        state = json.loads(state_path.read_text(encoding="utf-8"))
        config = RunConfig.from_dict(state["config"])
        return cls(runs_root, store_root, config=config, run_id=run_id)

    @staticmethod
    def _make_llm(config: RunConfig) -> LlmAdapter:
        if config.llm_mode is LlmMode.CANNED:
            return LlmAdapter(mode=LlmMode.CANNED)
        cassettes = config.llm_cassette_dir or os.environ.get("DIKWFLOW_LLM_CASSETTES")
        if config.llm_mode is LlmMode.REPLAY:
            return LlmAdapter(mode=LlmMode.REPLAY, cassette_dir=cassettes)
        return LlmAdapter(
            mode=config.llm_mode,
            cassette_dir=cassettes,
            endpoint=os.environ.get("DIKWFLOW_LLM_ENDPOINT"),
            api_key=os.environ.get("DIKWFLOW_LLM_API_KEY"),
            model=os.environ.get("DIKWFLOW_LLM_MODEL", "chat-default"),
        )

    @property
    def hermetic(self) -> bool:
        """Deterministic modes use the logical clock."""
        return self.config.llm_mode in (LlmMode.CANNED, LlmMode.REPLAY)

    def _tick(self) -> str:
        if self.hermetic:
            seq = self._publish_seq + self._action_seq
            stamp = LOGICAL_CLOCK_BASE + timedelta(seconds=seq)
            return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")
        return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    # -- submit --------------------------------------------------------------

    def _register(self, topic: Topic, spawned_by: TopicId | None) -> TopicRecord:
        tid = canonical_hash(topic)
        existing = self.records.get(tid.key)
        if existing is not None:
            return existing
        record = TopicRecord(topic=topic, topic_id=tid, status=TopicStatus.PENDING, spawned_by=spawned_by)
        self.records[tid.key] = record
        return record

    def _submit(self) -> None:
        for seed in self.config.seeds:
            self._register(seed, spawned_by=None)
        # downward propagation: knowledge topics spawn their evidence topics
        for record in self._sorted_records():
            if isinstance(record.topic, KnowledgeTopic):
                try:
                    infos = required_evidence(record.topic, self.catalog)
                except ValueError as exc:
                    # a descriptor no catalog entry satisfies: fail the topic,
                    # keep the run alive for the other seeds
                    record.status = TopicStatus.FAILED
                    record.error = f"EvidenceResolutionFailure: {exc}"
                    self._trace("failed", record.topic_id.key)
                    continue
                deps = []
                for info in infos:
                    child = self._register(info, spawned_by=record.topic_id)
                    deps.append(child.topic_id)
                record.deps = tuple(deps)
        # wisdom consumes every knowledge topic in the run
        knowledge_ids = tuple(
            r.topic_id for r in self._sorted_records() if r.topic_id.layer is Layer.KNOWLEDGE
        )
        for record in self._sorted_records():
            if isinstance(record.topic, WisdomTopic):
                record.deps = knowledge_ids
        self._check_acyclic()
        # cache pass: anything already in the store resolves immediately
        for record in self._sorted_records():
            if self.store.exists(record.topic_id):
                record.status = TopicStatus.RESOLVED
                self._trace("resolved", record.topic_id.key, cached=True)
        self._persist()

    def _check_acyclic(self) -> None:
        # spawned deps always sit at a strictly lower layer, so any cycle must
        # come from hand-seeded topics; verify by topological exhaustion
        remaining = {key: set(d.key for d in r.deps if d.key in self.records) for key, r in self.records.items()}
        while remaining:
            free = [k for k, deps in remaining.items() if not deps]
            if not free:
                raise OrchestratorError(f"dependency cycle among: {sorted(remaining)}")
            for k in free:
                del remaining[k]
            for deps in remaining.values():
                deps.difference_update(free)

    # -- scheduling ----------------------------------------------------------

    def _sorted_records(self) -> list[TopicRecord]:
        return [self.records[k] for k in sorted(self.records)]

    def _record(self, topic_id: TopicId) -> TopicRecord:
        try:
            return self.records[topic_id.key]
        except KeyError:
            raise UnknownTopic(topic_id.key) from None

    def _dep_satisfied(self, record: TopicRecord, dep: TopicRecord) -> bool:
        if dep.status is TopicStatus.RESOLVED:
            return True
        # a rejected claim shrinks a wisdom topic's pool instead of blocking it
        return (
            dep.status is TopicStatus.REJECTED
            and record.topic_id.layer is Layer.WISDOM
        )

    def _propagate_failures(self) -> None:
        changed = True
        while changed:
            changed = False
            for record in self._sorted_records():
                if record.status in TERMINAL_STATUSES or record.status is TopicStatus.RUNNING:
                    continue
                for dep_id in record.deps:
                    dep = self._record(dep_id)
                    if dep.status is TopicStatus.FAILED:
                        label = (
                            "EvidenceResolutionFailure"
                            if record.topic_id.layer is Layer.KNOWLEDGE
                            else "DependencyFailure"
                        )
                        check_transition(record.status, TopicStatus.FAILED)
                        record.status = TopicStatus.FAILED
                        record.error = f"{label}: dependency {dep_id.key} failed: {dep.error}"
                        self._trace("failed", record.topic_id.key)
                        changed = True
                        break

    def _promote_pending(self) -> None:
        for record in self._sorted_records():
            if record.status is not TopicStatus.PENDING:
                continue
            deps = [self._record(d) for d in record.deps]
            if not all(self._dep_satisfied(record, d) for d in deps):
                continue
            # the gate is evaluated only once the evidence is on the table
            if self.config.gate_for(record.topic_id.layer):
                check_transition(record.status, TopicStatus.AWAITING_APPROVAL)
                record.status = TopicStatus.AWAITING_APPROVAL
                self._trace("awaiting_approval", record.topic_id.key)
            else:
                check_transition(record.status, TopicStatus.READY)
                record.status = TopicStatus.READY
                self._trace("ready", record.topic_id.key)

    def step(self) -> dict[str, Any]:
        """One scheduling wave; returns the post-wave snapshot."""
        self._propagate_failures()
        self._promote_pending()
        ready = [r for r in self._sorted_records() if r.status is TopicStatus.READY]
        if not ready:
            self._persist()
            return self.snapshot()
        for record in ready:
            check_transition(record.status, TopicStatus.RUNNING)
            record.status = TopicStatus.RUNNING
        outcomes: dict[str, tuple[Artifact | None, str | None]] = {}
        with ThreadPoolExecutor(max_workers=self.config.max_parallelism) as pool:
            futures = {
                pool.submit(self._execute_traced, record): record for record in ready
            }
            for future, record in futures.items():
                try:
                    outcomes[record.topic_id.key] = (future.result(), None)
                except Exception as exc:
                    outcomes[record.topic_id.key] = (None, f"{type(exc).__name__}: {exc}")
        # deterministic publication order regardless of completion order
        for record in ready:
            artifact, error = outcomes[record.topic_id.key]
            if error is not None:
                record.status = TopicStatus.FAILED
                record.error = error
                self._trace("failed", record.topic_id.key)
                continue
            stamped = Artifact(
                topic_id=artifact.topic_id,
                payload=artifact.payload,
                report=artifact.report,
                provenance=artifact.provenance.with_actions(record.pending_actions),
                created_at=self._tick(),
            )
            try:
                result = self.store.publish(stamped)
            except NondeterminismAlarm as alarm:
                record.status = TopicStatus.FAILED
                record.error = f"NondeterminismAlarm: {alarm}"
                self._trace("failed", record.topic_id.key)
                continue
            if result.created:
                self._publish_seq += 1
            record.pending_actions = []
            record.status = TopicStatus.RESOLVED
            self._trace("resolved", record.topic_id.key, cached=not result.created)
        self._propagate_failures()
        self._promote_pending()
        self._persist()
        return self.snapshot()

    def run(self, auto_approver: str | None = None) -> dict[str, Any]:
        """Step until quiescent; optionally approving every gate as it opens."""
        while True:
            before = self._status_signature()
            self.step()
            if auto_approver is not None:
                for record in self._sorted_records():
                    if record.status is TopicStatus.AWAITING_APPROVAL:
                        self.review_action(
                            record.topic_id,
                            ReviewActionKind.APPROVE,
                            actor=auto_approver,
                            comment="auto-approved",
                        )
            if self._status_signature() == before:
                break
        return self.snapshot()

    def _status_signature(self) -> tuple[tuple[str, str], ...]:
        return tuple((k, self.records[k].status.value) for k in sorted(self.records))

    # -- execution -----------------------------------------------------------

    def _execute_traced(self, record: TopicRecord) -> Artifact:
        with self._conc_lock:
            self._active += 1
            self.peak_concurrency = max(self.peak_concurrency, self._active)
            self.trace.append({"event": "start", "topic": record.topic_id.key})
        try:
            return self._execute(record)
        finally:
            with self._conc_lock:
                self._active -= 1
                self.trace.append({"event": "end", "topic": record.topic_id.key})

    def _execute(self, record: TopicRecord) -> Artifact:
        topic = record.topic
        tid = record.topic_id
        layer = tid.layer
        if layer is Layer.DATA:
            payload, report = resolve_data_topic(self.table, self.catalog, topic)
            provenance = Provenance(
                dataset_fingerprint=self.fingerprint, agent_version=AGENT_VERSIONS[layer]
            )
        elif layer is Layer.INFORMATION:
            payload, report = resolve_info_topic(self.table, topic)
            provenance = Provenance(
                dataset_fingerprint=self.fingerprint, agent_version=AGENT_VERSIONS[layer]
            )
        elif layer is Layer.KNOWLEDGE:
            claim = evaluate_hypothesis(
                topic, self.catalog, self.store, _strict_resolver, self.llm
            )
            payload, report = claim.to_payload(), claim.report()
            provenance = claim_provenance(claim, self.fingerprint)
        else:
            claims = self._claim_pool(record)
            result = generate_portfolio(
                claims,
                topic,
                llm=self.llm,
                catalog=self.catalog,
            )
            payload = portfolio_payload(topic, result)
            report = portfolio_report(result)
            provenance = Provenance(
                input_artifact_ids=tuple(
                    sorted(d for d in record.deps if self._record(d).status is TopicStatus.RESOLVED)
                ),
                dataset_fingerprint=self.fingerprint,
                agent_version=AGENT_VERSIONS[layer],
                llm_exchange_ids=result.llm_exchange_ids,
            )
        return Artifact(
            topic_id=tid,
            payload=payload,
            report=report,
            provenance=provenance,
            created_at="",  # stamped at publish time
        )

    def _claim_pool(self, record: TopicRecord) -> list[KnowledgeClaim]:
        claims = []
        for dep_id in sorted(record.deps):
            dep = self._record(dep_id)
            if dep.status is not TopicStatus.RESOLVED:
                continue
            artifact = self.store.load(dep_id)
            claims.append(_claim_from_artifact(dep.topic, artifact))
        return claims

    # -- review --------------------------------------------------------------

    def review_action(
        self,
        topic_id: TopicId,
        action: ReviewActionKind,
        actor: str,
        comment: str = "",
        new_body: Mapping[str, Any] | None = None,
        candidate: str | None = None,
    ) -> TopicRecord:
        """Apply one human decision; every call lands in the action log."""
        record = self._record(topic_id)
        human = HumanAction(
            actor=actor, action=action, timestamp=self._tick(), comment=comment
        )
        self._action_seq += 1

        if candidate is not None:
            updated = self._review_candidate(record, action, candidate, human)
            self._log_action(human, topic_id, candidate=candidate)
            self._persist()
            return updated

        if record.status is not TopicStatus.AWAITING_APPROVAL:
            raise InvalidState(
                f"{topic_id.key} is {record.status.value}, not awaiting approval"
            )
        if action is ReviewActionKind.APPROVE:
            check_transition(record.status, TopicStatus.READY)
            record.status = TopicStatus.READY
            record.pending_actions.append(human)
        elif action is ReviewActionKind.REJECT:
            check_transition(record.status, TopicStatus.REJECTED)
            record.status = TopicStatus.REJECTED
            record.error = f"rejected by {actor}: {comment}" if comment else f"rejected by {actor}"
            record.pending_actions.append(human)
        else:
            if new_body is None:
                raise InvalidState("edit requires a replacement topic body")
            new_topic = parse_topic({"layer": topic_id.layer.value, **dict(new_body)})
            replacement = self._register(new_topic, spawned_by=record.spawned_by)
            if replacement.topic_id == record.topic_id:
                raise InvalidState("edit produced an identical topic")
            replacement.pending_actions.append(human)
            if isinstance(new_topic, KnowledgeTopic):
                deps = []
                for info in required_evidence(new_topic, self.catalog):
                    child = self._register(info, spawned_by=replacement.topic_id)
                    deps.append(child.topic_id)
                replacement.deps = tuple(deps)
            if self.store.exists(replacement.topic_id):
                # cache hit: resolve now and keep the audit trail on the artifact
                cached = self.store.load(replacement.topic_id)
                self.store.amend(
                    Artifact(
                        topic_id=cached.topic_id,
                        payload=cached.payload,
                        report=cached.report,
                        provenance=cached.provenance.with_actions(replacement.pending_actions),
                        created_at=cached.created_at,
                    )
                )
                replacement.pending_actions = []
                replacement.status = TopicStatus.RESOLVED
            check_transition(record.status, TopicStatus.REJECTED)
            record.status = TopicStatus.REJECTED
            record.error = f"superseded by {replacement.topic_id.key}"
            record.pending_actions.append(human)
            # dependents now consume the replacement
            for other in self._sorted_records():
                if record.topic_id in other.deps:
                    other.deps = tuple(
                        d for d in other.deps if d != record.topic_id
                    ) + (replacement.topic_id,)
        self._log_action(human, topic_id)
        self._persist()
        return record

    def _review_candidate(
        self,
        record: TopicRecord,
        action: ReviewActionKind,
        candidate: str,
        human: HumanAction,
    ) -> TopicRecord:
        if record.topic_id.layer is not Layer.WISDOM or record.status is not TopicStatus.RESOLVED:
            raise InvalidState("candidate review targets a resolved portfolio")
        if action not in (ReviewActionKind.REJECT, ReviewActionKind.APPROVE):
            raise InvalidState("candidate review supports approve and reject only")
        artifact = self.store.load(record.topic_id)
        payload = dict(artifact.payload)
        candidates = [dict(c) for c in payload.get("candidates", ())]
        hit = next((c for c in candidates if c.get("name") == candidate), None)
        if hit is None:
            raise UnknownTopic(f"no candidate named {candidate!r}")
        hit["rejected_by_review"] = action is ReviewActionKind.REJECT
        payload["candidates"] = candidates
        amended = Artifact(
            topic_id=artifact.topic_id,
            payload=payload,
            report=artifact.report,
            provenance=artifact.provenance.with_actions([human]),
            created_at=artifact.created_at,
        )
        self.store.amend(amended)
        return record

    def _log_action(
        self, human: HumanAction, topic_id: TopicId, candidate: str | None = None
    ) -> None:
        entry = {
            "seq": self._action_seq,
            "topic": topic_id.key,
            **human.to_dict(),
        }
        if candidate is not None:
            entry["candidate"] = candidate
        with (self.run_dir / "actions.log").open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")

    # -- reporting -----------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        counts: dict[str, int] = {}
        for record in self.records.values():
            counts[record.status.value] = counts.get(record.status.value, 0) + 1
        return {
            "run_id": self.run_id,
            "fingerprint": self.fingerprint,
            "status_counts": counts,
            "topics": [
                {
                    "key": r.topic_id.key,
                    "layer": r.topic_id.layer.value,
                    "status": r.status.value,
                    "deps": [d.key for d in r.deps],
                    "spawned_by": r.spawned_by.key if r.spawned_by else None,
                    "error": r.error,
                    "summary": r.summary(),
                }
                for r in self._sorted_records()
            ],
        }

    def find_record_by_hash(self, topic_hash: str) -> TopicRecord | None:
        for key in sorted(self.records):
            record = self.records[key]
            if record.topic_id.hash == topic_hash:
                return record
        return None

    def topic_detail(self, record: TopicRecord) -> dict[str, Any]:
        """Review-surface view: state plus previews of resolved inputs."""
        detail: dict[str, Any] = {
            "key": record.topic_id.key,
            "layer": record.topic_id.layer.value,
            "hash": record.topic_id.hash,
            "status": record.status.value,
            "deps": [d.key for d in record.deps],
            "spawned_by": record.spawned_by.key if record.spawned_by else None,
            "error": record.error,
            "summary": record.summary(),
        }
        if record.topic_id.layer is Layer.KNOWLEDGE:
            evidence = []
            for dep_id in sorted(record.deps):
                if self.store.exists(dep_id):
                    artifact = self.store.load(dep_id)
                    evidence.append(
                        {
                            "key": dep_id.key,
                            "result": artifact.payload.get("result"),
                            "report": artifact.report,
                        }
                    )
            detail["evidence"] = evidence
        elif record.topic_id.layer is Layer.WISDOM:
            claims = []
            for dep_id in sorted(record.deps):
                dep = self._record(dep_id)
                entry: dict[str, Any] = {
                    "key": dep_id.key,
                    "status": dep.status.value,
                    "summary": dep.summary(),
                }
                if dep.status is TopicStatus.RESOLVED and self.store.exists(dep_id):
                    payload = self.store.load(dep_id).payload
                    entry["support_score"] = payload.get("support_score")
                    entry["confidence_band"] = payload.get("confidence_band")
                claims.append(entry)
            detail["claims"] = claims
        if record.status is TopicStatus.RESOLVED and self.store.exists(record.topic_id):
            artifact = self.store.load(record.topic_id)
            detail["artifact"] = artifact.to_json_dict()
        return detail

    def portfolios(self) -> list[dict[str, Any]]:
        out = []
        for record in self._sorted_records():
            if record.topic_id.layer is Layer.WISDOM and record.status is TopicStatus.RESOLVED:
                artifact = self.store.load(record.topic_id)
                candidates = list(artifact.payload.get("candidates", ()))
                out.append(
                    {
                        "topic": record.topic_id.key,
                        "objective": artifact.payload.get("objective", ""),
                        "candidates": candidates,
                        "active_count": sum(
                            1 for c in candidates if not c.get("rejected_by_review")
                        ),
                        "rejected_count": sum(
                            1 for c in candidates if c.get("rejected_by_review")
                        ),
                    }
                )
        return out

    def find_artifact(self, topic_hash: str) -> Artifact | None:
        for layer in Layer:
            tid = TopicId(layer=layer, hash=topic_hash)
            if self.store.exists(tid):
                return self.store.load(tid)
        return None

    # -- persistence ---------------------------------------------------------

    def _persist(self) -> None:
        state = {
            "run_id": self.run_id,
            "engine_version": ENGINE_VERSION,
            "fingerprint": self.fingerprint,
            "config": self.config.to_dict(),
            "publish_seq": self._publish_seq,
            "action_seq": self._action_seq,
            "topics": [r.to_dict() for r in self._sorted_records()],
        }
        body = json.dumps(state, indent=2, sort_keys=True, ensure_ascii=False)
        path = self.run_dir / "state.json"
        tmp = path.with_name("state.json.tmp")
        tmp.write_text(body + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def _restore(self, state: Mapping[str, Any]) -> None:
        if state.get("fingerprint") != self.fingerprint:
            raise OrchestratorError(
                "dataset fingerprint changed since this run was created"
            )
        self._publish_seq = int(state.get("publish_seq", 0))
        self._action_seq = int(state.get("action_seq", 0))
        self.records = {}
        for item in state.get("topics", ()):
            record = TopicRecord.from_dict(item)
            # a crash can leave topics marked running; their work never
            # published, so they re-enter the ready pool
            if record.status is TopicStatus.RUNNING:
                record.status = TopicStatus.READY
            # reconcile with the store: published artifacts win
            if record.status not in TERMINAL_STATUSES and self.store.exists(record.topic_id):
                record.status = TopicStatus.RESOLVED
            self.records[record.topic_id.key] = record

    def _trace(self, event: str, topic_key: str, **extra: Any) -> None:
        self.trace.append({"event": event, "topic": topic_key, **extra})


def _load_inputs(config: RunConfig) -> tuple[EncounterTable, MessageCatalog]:
    table = ingest(config.dataset_path)
    if config.catalog_ref in ("stage1", "stage2"):
        catalog = builtin_catalog(config.catalog_ref)
    else:
        catalog = load_catalog(config.catalog_ref)
    return table, catalog


def _claim_from_artifact(topic: Topic, artifact: Artifact) -> KnowledgeClaim:
    payload = artifact.payload
    evidence = tuple(
        EvidenceItem(
            artifact_id=TopicId.from_dict(e["artifact_id"]),
            direction_match=bool(e["direction_match"]),
            p_value=e.get("p_value"),
            effect=float(e.get("effect", 0.0)),
            test_statistic=e.get("test_statistic"),
            weight=float(e.get("weight", 0.0)),
        )
        for e in payload.get("evidence", ())
    )
    return KnowledgeClaim(
        topic=topic,
        theoretical_rationale=payload.get("theoretical_rationale", ""),
        rationale_source=RationaleSource(payload.get("rationale_source", "canned")),
        evidence=evidence,
        support_score=float(payload["support_score"]),
        confidence_band=ConfidenceBand(payload["confidence_band"]),
        generalizability_notes=payload.get("generalizability_notes", ""),
        flags=tuple(payload.get("flags", ())),
        llm_exchange_ids=tuple(artifact.provenance.llm_exchange_ids),
    )
