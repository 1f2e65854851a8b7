"""Workspace layout and canonical serialization.

All persisted documents are canonical JSON: sorted keys, UTF-8, LF line
endings, two-space indent, trailing newline.  Canonical bytes are part of the
public contract, so round-trip tests can compare byte-for-byte.

Every path stored in a document is relative to the workspace root; crossing
the root is always an error, enforced by ``WorkspaceRef.resolve``.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import IoFailure, PathEscape, SerializationFailure
from .model import ItemDescriptor, ItemRecord

SCHEMA_VERSION = 1

ITEM_SUFFIX = ".item.json"
DESCRIPTOR_SUFFIX = ".descriptor.json"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write_text(path: Path, text: str):
    """Write via temp file + rename so readers see old or new bytes, never a mix."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(f"cannot write {path}: {exc}") from exc


@dataclass
class WorkspaceRef:
    """Root directory holding projects, items, inputs, and outputs."""

    root: Path

    def __post_init__(self):
        self.root = Path(self.root).resolve()

    @property
    def items_dir(self) -> Path:
        return self.root / ".items"

    def projects(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(
            p.name
            for p in self.root.iterdir()
            if p.is_dir() and not p.name.startswith(".")
        )

    def resolve(self, rel: str) -> Path:
        """Join ``rel`` to the root; any normalized escape is a PathEscape."""
        if not rel:
            raise PathEscape("empty relative path")
        candidate = Path(rel)
        if candidate.is_absolute():
            raise PathEscape(f"absolute path not allowed: {rel}")
        resolved = (self.root / candidate).resolve()
        if resolved != self.root and self.root not in resolved.parents:
            raise PathEscape(f"path escapes workspace: {rel}")
        return resolved

    def relative(self, abs_path: Path) -> str:
        return str(Path(abs_path).resolve().relative_to(self.root))


def item_file_name(item: ItemRecord) -> str:
    return f"{item.id}_{item.type_id}{ITEM_SUFFIX}"


def serialize_item(item: ItemRecord) -> str:
    doc = item.to_dict()
    doc["schema_version"] = SCHEMA_VERSION
    try:
        return canonical_json(doc)
    except (TypeError, ValueError) as exc:
        raise SerializationFailure(str(exc)) from exc


def deserialize_item(text: str) -> ItemRecord:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SerializationFailure(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SerializationFailure("item document must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SerializationFailure(
            f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}"
        )
    try:
        return ItemRecord.from_dict(doc)
    except (KeyError, ValueError, TypeError) as exc:
        raise SerializationFailure(f"malformed item document: {exc}") from exc


def save_item(item: ItemRecord, ws: WorkspaceRef) -> str:
    """Persist the item; returns the workspace-relative file path."""
    project_dir = ws.resolve(item.project)
    project_dir.mkdir(parents=True, exist_ok=True)
    rel = f"{item.project}/{item_file_name(item)}"
    atomic_write_text(ws.resolve(rel), serialize_item(item))
    return rel


def serialize_descriptor(d: ItemDescriptor) -> str:
    doc = d.to_dict()
    doc["schema_version"] = SCHEMA_VERSION
    return canonical_json(doc)


def deserialize_descriptor(text: str) -> ItemDescriptor:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SerializationFailure(f"invalid JSON: {exc}") from exc
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SerializationFailure(
            f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}"
        )
    try:
        return ItemDescriptor.from_dict(doc)
    except (KeyError, ValueError, TypeError) as exc:
        raise SerializationFailure(f"malformed descriptor: {exc}") from exc


def save_descriptor(d: ItemDescriptor, ws: WorkspaceRef) -> str:
    rel = f".items/{d.type_id}{DESCRIPTOR_SUFFIX}"
    ws.items_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(ws.items_dir / f"{d.type_id}{DESCRIPTOR_SUFFIX}", serialize_descriptor(d))
    return rel


def load_workspace(ws: WorkspaceRef):
    """Scan the workspace for persisted items and descriptor files.

    Malformed files never abort the scan; each yields one diagnostic string.
    Returns (items, descriptors, diagnostics).
    """
    if not ws.root.is_dir():
        raise IoFailure(f"workspace root not readable: {ws.root}")
    items: list[ItemRecord] = []
    descriptors: list[ItemDescriptor] = []
    diagnostics: list[str] = []

    for project in ws.projects():
        project_dir = ws.root / project
        for path in sorted(project_dir.rglob(f"*{ITEM_SUFFIX}")):
            try:
                items.append(deserialize_item(path.read_text(encoding="utf-8")))
            except (SerializationFailure, OSError, UnicodeDecodeError) as exc:
                diagnostics.append(f"skipped {ws.relative(path)}: {exc}")

    if ws.items_dir.is_dir():
        for path in sorted(ws.items_dir.glob(f"*{DESCRIPTOR_SUFFIX}")):
            try:
                descriptors.append(
                    deserialize_descriptor(path.read_text(encoding="utf-8"))
                )
            except (SerializationFailure, OSError, UnicodeDecodeError) as exc:
                diagnostics.append(f"skipped {ws.relative(path)}: {exc}")

    return items, descriptors, diagnostics
