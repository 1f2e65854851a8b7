"""Domain model: items, forms, entries, descriptors.

Everything here is plain data.  Forms describe *what* a workflow needs,
never how it is processed; processing logic lives in actions (see
``registry``/``builtin_items``).  All serialization goes through the
``to_dict``/``from_dict`` pairs so the persistence layer can emit canonical
JSON.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from .errors import SerializationFailure


class ItemState(str, Enum):
    FORM_READY = "FormReady"
    READY_TO_PROCESS = "ReadyToProcess"
    PROCESSING = "Processing"
    PROCESSED = "Processed"
    PROCESS_ERROR = "ProcessError"


class LifecycleEvent(str, Enum):
    REVIEW_ACCEPTED = "ReviewAccepted"
    REVIEW_REJECTED = "ReviewRejected"
    PROCESS_STARTED = "ProcessStarted"
    PROCESS_SUCCEEDED = "ProcessSucceeded"
    PROCESS_FAILED = "ProcessFailed"
    CANCELLED = "Cancelled"
    REOPEN = "Reopen"


class EntryKind(str, Enum):
    TEXT = "text"
    INTEGER = "integer"
    REAL = "real"
    FLAG = "flag"
    CHOICE = "choice"
    FILE = "file"
    EXECUTABLE = "executable"


def utc_now() -> str:
    """UTC timestamp at second resolution, ISO 8601 with Z suffix."""
    return datetime.now(timezone.utc).replace(microsecond=0).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


@dataclass
class Entry:
    """One typed key/value in a Form."""

    name: str
    kind: EntryKind = EntryKind.TEXT
    value: str = ""
    allowed: list[str] | None = None
    required: bool = False
    description: str = ""

    def violations(self, label: str) -> list[str]:
        """All invariant violations for this entry, one message each.

        ``label`` is the ``group.entry`` address used to anchor messages.
        File existence is checked by the reviewer, which knows the workspace;
        this method covers the value-shape invariants only.
        """
        problems: list[str] = []
        if self.required and self.value == "":
            problems.append(f"{label}: required entry is empty")
            return problems
        if self.value == "":
            return problems
        if self.kind is EntryKind.INTEGER:
            try:
                int(self.value)
            except ValueError:
                problems.append(f"{label}: {self.value!r} is not an integer")
        elif self.kind is EntryKind.REAL:
            try:
                float(self.value)
            except ValueError:
                problems.append(f"{label}: {self.value!r} is not a real number")
        elif self.kind is EntryKind.FLAG:
            if self.value not in ("true", "false"):
                problems.append(f"{label}: flag must be 'true' or 'false'")
        elif self.kind is EntryKind.CHOICE:
            if self.allowed is None or self.value not in self.allowed:
                problems.append(
                    f"{label}: {self.value!r} not in allowed set "
                    f"{self.allowed or []}"
                )
        elif self.kind in (EntryKind.FILE, EntryKind.EXECUTABLE):
            if self.value.startswith("/") or self.value.startswith("\\"):
                problems.append(
                    f"{label}: paths must be workspace-relative, got absolute"
                )
        return problems

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "value": self.value,
            "allowed": self.allowed,
            "required": self.required,
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Entry":
        return cls(
            name=d["name"],
            kind=EntryKind(d["kind"]),
            value=d.get("value", ""),
            allowed=d.get("allowed"),
            required=bool(d.get("required", False)),
            description=d.get("description", ""),
        )


@dataclass
class EntryGroup:
    name: str
    entries: list[Entry] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"name": self.name, "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "EntryGroup":
        return cls(
            name=d["name"], entries=[Entry.from_dict(e) for e in d["entries"]]
        )


@dataclass
class Form:
    """User-editable description of everything an item needs."""

    item_id: str = ""
    description: str = ""
    groups: list[EntryGroup] = field(default_factory=list)
    actions: list[str] = field(default_factory=list)

    def group(self, name: str) -> EntryGroup | None:
        for g in self.groups:
            if g.name == name:
                return g
        return None

    def entry(self, ref: str) -> Entry | None:
        """Look up an entry by its ``group.entry`` address."""
        if "." not in ref:
            return None
        gname, ename = ref.split(".", 1)
        g = self.group(gname)
        if g is None:
            return None
        for e in g.entries:
            if e.name == ename:
                return e
        return None

    def value(self, ref: str, default: str = "") -> str:
        e = self.entry(ref)
        return e.value if e is not None else default

    def iter_entries(self):
        for g in self.groups:
            for e in g.entries:
                yield g, e

    def clone(self) -> "Form":
        return Form.from_dict(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "description": self.description,
            "groups": [g.to_dict() for g in self.groups],
            "actions": list(self.actions),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Form":
        return cls(
            item_id=d.get("item_id", ""),
            description=d.get("description", ""),
            groups=[EntryGroup.from_dict(g) for g in d.get("groups", [])],
            actions=list(d.get("actions", [])),
        )


@dataclass
class FormStatus:
    verdict: str  # "Accepted" | "Rejected"
    messages: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.verdict == "Rejected" and not self.messages:
            raise SerializationFailure("Rejected status requires messages")

    @property
    def accepted(self) -> bool:
        return self.verdict == "Accepted"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "messages": list(self.messages)}


@dataclass
class ItemRecord:
    """A concrete workflow instance."""

    id: str
    type_id: str
    name: str
    state: ItemState
    form: Form
    project: str
    created_at: str = field(default_factory=utc_now)
    updated_at: str = field(default_factory=utc_now)

    def touch(self):
        self.updated_at = utc_now()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "type_id": self.type_id,
            "name": self.name,
            "state": self.state.value,
            "form": self.form.to_dict(),
            "project": self.project,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ItemRecord":
        return cls(
            id=d["id"],
            type_id=d["type_id"],
            name=d["name"],
            state=ItemState(d["state"]),
            form=Form.from_dict(d["form"]),
            project=d["project"],
            created_at=d["created_at"],
            updated_at=d["updated_at"],
        )


@dataclass
class PipelineStep:
    """One action invocation in a descriptor pipeline.

    ``bindings`` maps action parameter names to ``group.entry`` references
    resolved against the item's form at dispatch time.
    """

    action: str
    bindings: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"action": self.action, "bindings": dict(self.bindings)}

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineStep":
        return cls(action=d["action"], bindings=dict(d.get("bindings", {})))


@dataclass
class ItemDescriptor:
    """Declarative definition of an item type."""

    type_id: str
    display_name: str
    form_template: Form
    pipeline: list[PipelineStep] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "type_id": self.type_id,
            "display_name": self.display_name,
            "form_template": self.form_template.to_dict(),
            "pipeline": [s.to_dict() for s in self.pipeline],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ItemDescriptor":
        return cls(
            type_id=d["type_id"],
            display_name=d["display_name"],
            form_template=Form.from_dict(d["form_template"]),
            pipeline=[PipelineStep.from_dict(s) for s in d.get("pipeline", [])],
        )
