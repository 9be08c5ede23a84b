"""Content-addressed artifact store.

One JSON document per artifact at ``<root>/<fingerprint>/<layer>/<topic-hash>.json``.
Artifacts for the same topic computed over different datasets never collide
because the dataset fingerprint namespaces the tree.

Publication is idempotent: the first writer wins, later writers verify that
their payload matches the stored one and discard their copy. A payload
mismatch for the same topic id means an agent produced different output for
identical inputs, which is raised as :class:`NondeterminismAlarm` rather than
silently overwritten.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Mapping

from .artifacts import Artifact, Layer, TopicId
from .canonical import digest_hex


class StoreError(Exception):
    """Base class for store failures."""


class ArtifactNotFound(StoreError, KeyError):
    def __init__(self, topic_id: TopicId) -> None:
        super().__init__(topic_id.key)
        self.topic_id = topic_id


class NondeterminismAlarm(StoreError):
    """Same topic id, different payload: a rerun diverged from the stored result."""

    def __init__(self, topic_id: TopicId, stored_digest: str, offered_digest: str) -> None:
        super().__init__(
            f"payload divergence for {topic_id.key}: "
            f"stored {stored_digest[:12]}, offered {offered_digest[:12]}"
        )
        self.topic_id = topic_id
        self.stored_digest = stored_digest
        self.offered_digest = offered_digest


def payload_digest(payload: Mapping[str, Any]) -> str:
    return digest_hex(dict(payload))


@dataclass(frozen=True)
class PublishResult:
    artifact: Artifact
    created: bool  # False means an equal artifact was already stored


class ArtifactStore:
    """Durable, thread-safe artifact storage for one dataset fingerprint."""

    def __init__(self, root: str | Path, fingerprint: str) -> None:
        if not fingerprint:
            raise ValueError("fingerprint must be non-empty")
        self.root = Path(root)
        self.fingerprint = fingerprint
        self._lock = threading.Lock()
        self._base = self.root / fingerprint

    def path_for(self, topic_id: TopicId) -> Path:
        return self._base / topic_id.layer.value / f"{topic_id.hash}.json"

    def exists(self, topic_id: TopicId) -> bool:
        return self.path_for(topic_id).is_file()

    def load(self, topic_id: TopicId) -> Artifact:
        path = self.path_for(topic_id)
        try:
            with path.open(encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ArtifactNotFound(topic_id) from None
        return Artifact.from_json_dict(doc)

    def get(self, topic_id: TopicId) -> Artifact | None:
        try:
            return self.load(topic_id)
        except ArtifactNotFound:
            return None

    def publish(self, artifact: Artifact) -> PublishResult:
        """Store the artifact unless an equal one already exists.

        Returns the winning artifact. Raises NondeterminismAlarm when the
        stored payload for this topic id differs from the offered one.
        """
        with self._lock:
            existing = self.get(artifact.topic_id)
            if existing is not None:
                stored = payload_digest(existing.payload)
                offered = payload_digest(artifact.payload)
                if stored != offered:
                    raise NondeterminismAlarm(artifact.topic_id, stored, offered)
                return PublishResult(artifact=existing, created=False)
            self._write(artifact)
            return PublishResult(artifact=artifact, created=True)

    def amend(self, artifact: Artifact) -> Artifact:
        """Overwrite an existing artifact in place.

        Reserved for audited human edits (portfolio review flags, appended
        human actions); agent code must go through publish().
        """
        with self._lock:
            if not self.exists(artifact.topic_id):
                raise ArtifactNotFound(artifact.topic_id)
            self._write(artifact)
            return artifact

    def _write(self, artifact: Artifact) -> None:
        path = self.path_for(artifact.topic_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        body = json.dumps(artifact.to_json_dict(), ensure_ascii=False, indent=2, sort_keys=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(body + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def topic_ids(self, layer: Layer | None = None) -> list[TopicId]:
        layers = [layer] if layer is not None else list(Layer)
        found: list[TopicId] = []
        for lyr in layers:
            directory = self._base / lyr.value
            if not directory.is_dir():
                continue
            for entry in sorted(directory.glob("*.json")):
                found.append(TopicId(layer=lyr, hash=entry.stem))
        return found

    def __iter__(self) -> Iterator[Artifact]:
        for topic_id in self.topic_ids():
            yield self.load(topic_id)

    def __len__(self) -> int:
        return len(self.topic_ids())
