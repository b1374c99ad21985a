"""Metadata graph for run artifacts: records, named links, collections.

Artifacts are stored content-addressed (sha256), so identical payloads are
kept once no matter how many records reference them.  The whole graph of a
collection can be exported to a deterministic document and re-imported
losslessly.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

STORE_FORMAT = "cb-records"
STORE_VERSION = 1
HASH_ALGORITHM = "sha256"

GRAPH_FORMAT = "cb-record-graph"
GRAPH_VERSION = 1


class StorageError(RuntimeError):
    pass


class UnknownRecord(KeyError):
    pass


class UnknownCollection(KeyError):
    pass


class DuplicateLink(ValueError):
    pass


class SelfLink(ValueError):
    pass


class CollectionCycle(ValueError):
    pass


@dataclass(frozen=True)
class Artifact:
    name: str
    content_hash: str
    size: int
    storage_path: str


@dataclass(frozen=True)
class Record:
    record_id: str
    title: str
    description: str
    metadata: Mapping[str, str]
    artifacts: tuple[Artifact, ...]
    created_at: int  # UTC ns

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "title": self.title,
            "description": self.description,
            "metadata": dict(sorted(self.metadata.items())),
            "artifacts": [
                {
                    "name": a.name,
                    "content_hash": a.content_hash,
                    "size": a.size,
                    "storage_path": a.storage_path,
                }
                for a in self.artifacts
            ],
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Record":
        return cls(
            record_id=data["record_id"],
            title=data["title"],
            description=data.get("description", ""),
            metadata=dict(data.get("metadata", {})),
            artifacts=tuple(
                Artifact(
                    name=a["name"],
                    content_hash=a["content_hash"],
                    size=int(a["size"]),
                    storage_path=a["storage_path"],
                )
                for a in data.get("artifacts", [])
            ),
            created_at=int(data["created_at"]),
        )


@dataclass(frozen=True)
class RecordLink:
    from_id: str
    to_id: str
    name: str


@dataclass(frozen=True)
class Collection:
    collection_id: str
    title: str
    member_record_ids: tuple[str, ...]
    parent_collection_id: Optional[str] = None
    created_at: int = 0

    def to_dict(self) -> dict:
        return {
            "collection_id": self.collection_id,
            "title": self.title,
            "member_record_ids": sorted(self.member_record_ids),
            "parent_collection_id": self.parent_collection_id,
            "created_at": self.created_at,
        }


class RecordStore:
    """Filesystem-backed record/link/collection store.

    Layout: ``records/<id>.json``, ``collections/<id>.json``,
    ``artifacts/<hash>``, ``links.jsonl`` and a ``store.json`` header
    naming the format version and hash algorithm.
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._lock = threading.RLock()
        for sub in ("records", "collections", "artifacts"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        header = self.root / "store.json"
        if not header.exists():
            self._write_json(
                header,
                {"format": STORE_FORMAT, "version": STORE_VERSION, "hash": HASH_ALGORITHM},
            )
        else:
            meta = json.loads(header.read_text(encoding="utf-8"))
            if meta.get("hash") != HASH_ALGORITHM:
                raise StorageError(f"store uses unsupported hash {meta.get('hash')!r}")

    # -- helpers

    @staticmethod
    def _write_json(path: Path, payload: dict) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        tmp.replace(path)

    def _record_path(self, record_id: str) -> Path:
        return self.root / "records" / f"{record_id}.json"

    def _collection_path(self, collection_id: str) -> Path:
        return self.root / "collections" / f"{collection_id}.json"

    def _links_path(self) -> Path:
        return self.root / "links.jsonl"

    # -- records

    def create_record(
        self,
        title: str,
        description: str = "",
        metadata: Optional[Mapping[str, str]] = None,
        artifacts: Sequence[tuple[str, bytes]] = (),
        record_id: Optional[str] = None,
        created_at: Optional[int] = None,
    ) -> Record:
        """Persist a record; artifact payloads are stored content-addressed."""
        if not title:
            raise ValueError("record title must be non-empty")
        with self._lock:
            rid = record_id or uuid.uuid4().hex
            if self._record_path(rid).exists():
                raise StorageError(f"record id {rid} already exists")
            stored = []
            for name, payload in artifacts:
                digest = hashlib.sha256(payload).hexdigest()
                blob = self.root / "artifacts" / digest
                if not blob.exists():
                    tmp = blob.with_suffix(".tmp")
                    tmp.write_bytes(payload)
                    tmp.replace(blob)
                stored.append(
                    Artifact(
                        name=name,
                        content_hash=digest,
                        size=len(payload),
                        storage_path=f"artifacts/{digest}",
                    )
                )
            record = Record(
                record_id=rid,
                title=title,
                description=description,
                metadata=dict(metadata or {}),
                artifacts=tuple(stored),
                created_at=time.time_ns() if created_at is None else created_at,
            )
            self._write_json(self._record_path(rid), record.to_dict())
            return record

    def get_record(self, record_id: str) -> Record:
        path = self._record_path(record_id)
        if not path.exists():
            raise UnknownRecord(record_id)
        return Record.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def record_ids(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "records").glob("*.json"))

    def artifact_bytes(self, content_hash: str) -> bytes:
        blob = self.root / "artifacts" / content_hash
        if not blob.exists():
            raise StorageError(f"missing artifact {content_hash}")
        return blob.read_bytes()

    # -- links

    def link_records(self, from_id: str, to_id: str, name: str) -> RecordLink:
        """Create a named directed link; duplicates and self-links rejected."""
        if not name:
            raise ValueError("link name must be non-empty")
        if from_id == to_id:
            raise SelfLink(from_id)
        with self._lock:
            for rid in (from_id, to_id):
                if not self._record_path(rid).exists():
                    raise UnknownRecord(rid)
            link = RecordLink(from_id=from_id, to_id=to_id, name=name)
            if link in self.links():
                raise DuplicateLink(f"{from_id} -[{name}]-> {to_id}")
            with open(self._links_path(), "a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {"from_id": from_id, "to_id": to_id, "name": name},
                        sort_keys=True,
                    )
                    + "\n"
                )
                fh.flush()
            return link

    def links(self) -> list[RecordLink]:
        path = self._links_path()
        if not path.exists():
            return []
        out = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            out.append(RecordLink(data["from_id"], data["to_id"], data["name"]))
        return out

    def adjacent_links(self, record_id: str) -> list[RecordLink]:
        """Links touching the record in either direction."""
        return [
            l for l in self.links() if record_id in (l.from_id, l.to_id)
        ]

    # -- collections

    def create_collection(
        self,
        title: str,
        parent_collection_id: Optional[str] = None,
        collection_id: Optional[str] = None,
        created_at: Optional[int] = None,
    ) -> Collection:
        with self._lock:
            cid = collection_id or uuid.uuid4().hex
            if self._collection_path(cid).exists():
                raise StorageError(f"collection id {cid} already exists")
            if parent_collection_id is not None:
                if not self._collection_path(parent_collection_id).exists():
                    raise UnknownCollection(parent_collection_id)
                if self._creates_cycle(cid, parent_collection_id):
                    raise CollectionCycle(cid)
            collection = Collection(
                collection_id=cid,
                title=title,
                member_record_ids=(),
                parent_collection_id=parent_collection_id,
                created_at=time.time_ns() if created_at is None else created_at,
            )
            self._write_json(self._collection_path(cid), collection.to_dict())
            return collection

    def _creates_cycle(self, child_id: str, parent_id: str) -> bool:
        seen = {child_id}
        current: Optional[str] = parent_id
        while current is not None:
            if current in seen:
                return True
            seen.add(current)
            current = self.get_collection(current).parent_collection_id
        return False

    def get_collection(self, collection_id: str) -> Collection:
        path = self._collection_path(collection_id)
        if not path.exists():
            raise UnknownCollection(collection_id)
        data = json.loads(path.read_text(encoding="utf-8"))
        return Collection(
            collection_id=data["collection_id"],
            title=data["title"],
            member_record_ids=tuple(data.get("member_record_ids", [])),
            parent_collection_id=data.get("parent_collection_id"),
            created_at=int(data.get("created_at", 0)),
        )

    def collection_ids(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "collections").glob("*.json"))

    def add_to_collection(self, collection_id: str, record_id: str) -> None:
        with self._lock:
            collection = self.get_collection(collection_id)
            if not self._record_path(record_id).exists():
                raise UnknownRecord(record_id)
            members = set(collection.member_record_ids)
            members.add(record_id)
            updated = Collection(
                collection_id=collection.collection_id,
                title=collection.title,
                member_record_ids=tuple(sorted(members)),
                parent_collection_id=collection.parent_collection_id,
                created_at=collection.created_at,
            )
            self._write_json(self._collection_path(collection_id), updated.to_dict())

    def _closure_collections(self, collection_id: str) -> list[Collection]:
        """The collection plus all (transitive) child collections."""
        root = self.get_collection(collection_id)
        all_collections = [self.get_collection(cid) for cid in self.collection_ids()]
        closure = {root.collection_id: root}
        changed = True
        while changed:
            changed = False
            for c in all_collections:
                if c.parent_collection_id in closure and c.collection_id not in closure:
                    closure[c.collection_id] = c
                    changed = True
        return [closure[cid] for cid in sorted(closure)]

    # -- export / import

    def export_graph(self, collection_id: str, dest_dir: Union[str, Path]) -> Path:
        """Write the collection closure as graph.json plus artifact blobs.

        Deterministic ordering throughout, so export o import o export is
        byte-identical.
        """
        collections = self._closure_collections(collection_id)
        member_ids = sorted({rid for c in collections for rid in c.member_record_ids})
        records = [self.get_record(rid) for rid in member_ids]
        member_set = set(member_ids)
        links = sorted(
            (
                l
                for l in self.links()
                if l.from_id in member_set and l.to_id in member_set
            ),
            key=lambda l: (l.from_id, l.to_id, l.name),
        )
        doc = {
            "format": GRAPH_FORMAT,
            "version": GRAPH_VERSION,
            "hash_algorithm": HASH_ALGORITHM,
            "root_collection_id": collection_id,
            "collections": [c.to_dict() for c in collections],
            "records": [r.to_dict() for r in records],
            "links": [
                {"from_id": l.from_id, "to_id": l.to_id, "name": l.name} for l in links
            ],
        }
        dest = Path(dest_dir)
        (dest / "artifacts").mkdir(parents=True, exist_ok=True)
        for record in records:
            for artifact in record.artifacts:
                payload = self.artifact_bytes(artifact.content_hash)
                (dest / "artifacts" / artifact.content_hash).write_bytes(payload)
        graph_path = dest / "graph.json"
        graph_path.write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return graph_path

    def import_graph(self, src_dir: Union[str, Path]) -> str:
        """Load an exported graph into this store; ids are preserved."""
        src = Path(src_dir)
        doc = json.loads((src / "graph.json").read_text(encoding="utf-8"))
        if doc.get("format") != GRAPH_FORMAT:
            raise StorageError(f"not a record graph: {doc.get('format')!r}")
        with self._lock:
            for rdata in doc["records"]:
                artifacts = []
                for a in rdata["artifacts"]:
                    payload = (src / "artifacts" / a["content_hash"]).read_bytes()
                    digest = hashlib.sha256(payload).hexdigest()
                    if digest != a["content_hash"]:
                        raise StorageError(
                            f"artifact {a['content_hash']} corrupted in export"
                        )
                    artifacts.append((a["name"], payload))
                self.create_record(
                    title=rdata["title"],
                    description=rdata.get("description", ""),
                    metadata=rdata.get("metadata", {}),
                    artifacts=artifacts,
                    record_id=rdata["record_id"],
                    created_at=rdata["created_at"],
                )
            by_id = {c["collection_id"]: c for c in doc["collections"]}
            created: set[str] = set()

            def create_with_parents(cid: str) -> None:
                if cid in created:
                    return
                cdata = by_id[cid]
                parent = cdata.get("parent_collection_id")
                if parent in by_id:
                    create_with_parents(parent)
                self.create_collection(
                    title=cdata["title"],
                    parent_collection_id=parent if parent in by_id else None,
                    collection_id=cid,
                    created_at=cdata["created_at"],
                )
                created.add(cid)
                for rid in cdata["member_record_ids"]:
                    self.add_to_collection(cid, rid)

            for cid in sorted(by_id):
                create_with_parents(cid)
            for ldata in doc["links"]:
                self.link_records(ldata["from_id"], ldata["to_id"], ldata["name"])
        return doc["root_collection_id"]

    # -- integrity

    def integrity_check(self) -> list[dict]:
        """Verify hashes, link endpoints and collection structure.

        Returns findings as data; an empty list means the store is healthy.
        """
        findings: list[dict] = []
        record_ids = set(self.record_ids())
        for rid in sorted(record_ids):
            record = self.get_record(rid)
            for artifact in record.artifacts:
                blob = self.root / artifact.storage_path
                if not blob.exists():
                    findings.append(
                        {
                            "kind": "missing-artifact",
                            "record_id": rid,
                            "artifact": artifact.name,
                            "hash": artifact.content_hash,
                        }
                    )
                    continue
                digest = hashlib.sha256(blob.read_bytes()).hexdigest()
                if digest != artifact.content_hash:
                    findings.append(
                        {
                            "kind": "hash-mismatch",
                            "record_id": rid,
                            "artifact": artifact.name,
                            "expected": artifact.content_hash,
                            "actual": digest,
                        }
                    )
        seen_links = set()
        for link in self.links():
            for endpoint in (link.from_id, link.to_id):
                if endpoint not in record_ids:
                    findings.append(
                        {
                            "kind": "dangling-link",
                            "from_id": link.from_id,
                            "to_id": link.to_id,
                            "name": link.name,
                            "missing": endpoint,
                        }
                    )
            if link.from_id == link.to_id:
                findings.append(
                    {"kind": "self-link", "record_id": link.from_id, "name": link.name}
                )
            key = (link.from_id, link.to_id, link.name)
            if key in seen_links:
                findings.append(
                    {
                        "kind": "duplicate-link",
                        "from_id": link.from_id,
                        "to_id": link.to_id,
                        "name": link.name,
                    }
                )
            seen_links.add(key)
        collection_ids = set(self.collection_ids())
        for cid in sorted(collection_ids):
            collection = self.get_collection(cid)
            for rid in collection.member_record_ids:
                if rid not in record_ids:
                    findings.append(
                        {"kind": "unknown-member", "collection_id": cid, "record_id": rid}
                    )
            # walk the parent chain looking for a cycle
            seen = {cid}
            current = collection.parent_collection_id
            while current is not None:
                if current not in collection_ids:
                    findings.append(
                        {
                            "kind": "unknown-parent",
                            "collection_id": cid,
                            "parent_id": current,
                        }
                    )
                    break
                if current in seen:
                    findings.append({"kind": "collection-cycle", "collection_id": cid})
                    break
                seen.add(current)
                current = self.get_collection(current).parent_collection_id
        return findings
