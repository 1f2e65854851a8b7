"""Dynamic registries for item types and actions.

Both registries are read-mostly with atomic replace semantics: writers swap a
whole descriptor under a lock, readers take consistent snapshots.  Actions are
stateless templates; every processing run obtains a fresh ActionRun instance.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Callable

from .errors import InvalidDescriptor, UnknownAction, UnknownType
from .model import ItemDescriptor


class ItemTypeRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._descriptors: dict[str, ItemDescriptor] = {}
        self._revision = 0

    @property
    def revision(self) -> int:
        return self._revision

    def register(self, d: ItemDescriptor) -> str:
        if not d.type_id:
            raise InvalidDescriptor("descriptor type_id must be non-empty")
        for group in d.form_template.groups:
            names = [e.name for e in group.entries]
            if len(names) != len(set(names)):
                raise InvalidDescriptor(
                    f"duplicate entry names in template group {group.name!r}"
                )
        group_names = [g.name for g in d.form_template.groups]
        if len(group_names) != len(set(group_names)):
            raise InvalidDescriptor("duplicate group names in template")
        with self._lock:
            self._descriptors[d.type_id] = d
            self._revision += 1
        return d.type_id

    def get(self, type_id: str) -> ItemDescriptor:
        with self._lock:
            try:
                return self._descriptors[type_id]
            except KeyError:
                raise UnknownType(f"unknown item type: {type_id}") from None

    def contains(self, type_id: str) -> bool:
        with self._lock:
            return type_id in self._descriptors

    def list_types(self) -> list[tuple[str, str]]:
        """(type_id, display_name) pairs, lexicographic by type_id."""
        with self._lock:
            snapshot = list(self._descriptors.values())
        return sorted((d.type_id, d.display_name) for d in snapshot)


class ActionRun:
    """One execution of an action; subclasses carry per-run state.

    ``execute`` receives a context dict with at least: engine, workspace,
    item, data (bound parameter values), ticket.  ``kill`` is the cancel
    hook, called from another thread.
    """

    def execute(self, ctx: dict):  # pragma: no cover - interface
        raise NotImplementedError

    def kill(self):
        pass


@dataclass
class ActionSpec:
    """A registered, reusable workflow task."""

    name: str
    factory: Callable[[], ActionRun]
    description: str = ""
    params: list[str] = field(default_factory=list)

    _run_counter = itertools.count()

    def new_run(self) -> ActionRun:
        run = self.factory()
        run.run_id = f"{self.name}#{next(ActionSpec._run_counter)}"
        return run


class ActionRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._actions: dict[str, ActionSpec] = {}

    def register(self, spec: ActionSpec) -> str:
        if not spec.name:
            raise InvalidDescriptor("action name must be non-empty")
        with self._lock:
            self._actions[spec.name] = spec
        return spec.name

    def get(self, name: str) -> ActionSpec:
        with self._lock:
            try:
                return self._actions[name]
            except KeyError:
                raise UnknownAction(f"unknown action: {name}") from None

    def list_actions(self) -> list[str]:
        with self._lock:
            return sorted(self._actions)
