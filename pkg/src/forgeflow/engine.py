"""Core engine: item creation, form review, processing dispatch.

One Engine owns one workspace.  Registries are shared and thread-safe; each
item is confined to at most one in-flight processing ticket, and all state
transitions plus persistence writes for an item are serialized under the
item's lock.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from . import fsm, persistence
from .errors import (
    ActionFailure,
    InvalidProject,
    PathEscape,
    UnknownAction,
    UnknownEntry,
    UnknownItem,
    WrongState,
)
from .jobs import JobManager
from .model import (
    EntryKind,
    Form,
    FormStatus,
    ItemDescriptor,
    ItemRecord,
    ItemState,
    LifecycleEvent,
)
from .persistence import WorkspaceRef
from .registry import ActionRegistry, ActionSpec, ItemTypeRegistry


@dataclass
class ProcessTicket:
    """Opaque handle for one processing run of one item."""

    ticket_id: str
    item_id: str
    done: threading.Event = field(default_factory=threading.Event, repr=False)
    result_state: ItemState | None = None
    message: str = ""
    job_ids: list[str] = field(default_factory=list)
    cancel_requested: bool = False
    current_run: object = None

    def wait(self, timeout: float | None = None) -> bool:
        return self.done.wait(timeout)


class Engine:
    def __init__(self, workspace, create: bool = True):
        root = Path(workspace)
        if create:
            root.mkdir(parents=True, exist_ok=True)
        self.ws = WorkspaceRef(root)
        self.items: dict[str, ItemRecord] = {}
        self.item_types = ItemTypeRegistry()
        self.actions = ActionRegistry()
        self.jobs = JobManager(self.ws)
        self.diagnostics: list[str] = []
        self._item_locks: dict[str, threading.Lock] = {}
        self._tickets: dict[str, ProcessTicket] = {}
        self._active: dict[str, ProcessTicket] = {}  # item_id -> in-flight ticket
        self._latest_job: dict[str, str] = {}
        self._lock = threading.Lock()

        from . import builtin_items

        builtin_items.install(self)
        self._load()

    # -- workspace ---------------------------------------------------------

    def _load(self):
        items, descriptors, diags = persistence.load_workspace(self.ws)
        self.diagnostics.extend(diags)
        for d in descriptors:
            self.item_types.register(d)
        for item in items:
            self.items[item.id] = item

    def refresh_descriptors(self):
        """Pick up descriptor files dropped into .items/ since startup."""
        if not self.ws.items_dir.is_dir():
            return
        for path in sorted(self.ws.items_dir.glob("*" + persistence.DESCRIPTOR_SUFFIX)):
            try:
                d = persistence.deserialize_descriptor(path.read_text(encoding="utf-8"))
            except Exception as exc:
                self.diagnostics.append(f"skipped {path.name}: {exc}")
                continue
            if not self.item_types.contains(d.type_id):
                self.item_types.register(d)

    def _item_lock(self, item_id: str) -> threading.Lock:
        with self._lock:
            return self._item_locks.setdefault(item_id, threading.Lock())

    def _log_transition(self, item: ItemRecord, event: LifecycleEvent,
                        prev: ItemState):
        line = json.dumps(
            {
                "item_id": item.id,
                "from": prev.value,
                "event": event.value,
                "to": item.state.value,
            },
            sort_keys=True,
        )
        self.ws.items_dir.mkdir(parents=True, exist_ok=True)
        with (self.ws.items_dir / "transitions.log").open(
            "a", encoding="utf-8", newline="\n"
        ) as f:
            f.write(line + "\n")

    def _transition(self, item: ItemRecord, event: LifecycleEvent,
                    persist: bool = False):
        prev = item.state
        item.state = fsm.transition(item.state, event)
        item.touch()
        self._log_transition(item, event, prev)
        if persist:
            persistence.save_item(item, self.ws)

    # -- registries --------------------------------------------------------

    def register_item_descriptor(self, d: ItemDescriptor) -> str:
        return self.item_types.register(d)

    def list_item_types(self) -> list[tuple[str, str]]:
        self.refresh_descriptors()
        return self.item_types.list_types()

    def register_action(self, spec: ActionSpec) -> str:
        return self.actions.register(spec)

    def get_action(self, name: str) -> ActionSpec:
        return self.actions.get(name)

    # -- items -------------------------------------------------------------

    def get_item(self, item_id: str) -> ItemRecord:
        with self._lock:
            item = self.items.get(item_id)
        if item is None:
            raise UnknownItem(f"unknown item: {item_id}")
        return item

    def list_items(self) -> list[ItemRecord]:
        with self._lock:
            return sorted(self.items.values(), key=lambda i: i.id)

    def create_item(self, type_id: str, project: str, name: str = "") -> ItemRecord:
        self.refresh_descriptors()
        descriptor = self.item_types.get(type_id)
        try:
            self.ws.resolve(project)
        except PathEscape as exc:
            raise InvalidProject(str(exc)) from exc
        item_id = uuid.uuid4().hex[:8]
        form = descriptor.form_template.clone()
        form.item_id = item_id
        item = ItemRecord(
            id=item_id,
            type_id=type_id,
            name=name or f"{descriptor.display_name} {item_id}",
            state=ItemState.FORM_READY,
            form=form,
            project=project,
        )
        with self._lock:
            self.items[item_id] = item
        persistence.save_item(item, self.ws)
        return item

    # -- review ------------------------------------------------------------

    def validate_form(self, item: ItemRecord, form: Form) -> list[str]:
        """All entry-invariant violations in a form, one message per violation."""
        messages: list[str] = []
        for group, entry in form.iter_entries():
            label = f"{group.name}.{entry.name}"
            problems = entry.violations(label)
            messages.extend(problems)
            if (
                not problems
                and entry.kind is EntryKind.FILE
                and entry.required
                and entry.value
            ):
                try:
                    if not self.ws.resolve(entry.value).is_file():
                        messages.append(f"{label}: file not found in workspace")
                except PathEscape:
                    messages.append(f"{label}: path escapes workspace")
        return messages

    def update_form(self, item_id: str, edits: dict[str, str]) -> ItemRecord:
        """Set entry values by ``group.entry`` address, without review."""
        item = self.get_item(item_id)
        with self._item_lock(item_id):
            if item.state not in (ItemState.FORM_READY, ItemState.READY_TO_PROCESS):
                raise WrongState(f"cannot edit form while {item.state.value}")
            for ref, value in edits.items():
                entry = item.form.entry(ref)
                if entry is None:
                    raise UnknownEntry(f"no such entry: {ref}")
                entry.value = value
            item.touch()
            persistence.save_item(item, self.ws)
        return item

    def review_form(self, item_id: str, edited: Form | None = None) -> FormStatus:
        item = self.get_item(item_id)
        with self._item_lock(item_id):
            if item.state not in (ItemState.FORM_READY, ItemState.READY_TO_PROCESS):
                raise WrongState(
                    f"cannot review item in state {item.state.value}"
                )
            if edited is not None:
                edited.item_id = item.id
                item.form = edited
            messages = self.validate_form(item, item.form)
            if messages:
                status = FormStatus("Rejected", messages)
                self._transition(item, LifecycleEvent.REVIEW_REJECTED)
            else:
                status = FormStatus("Accepted")
                if item.state is ItemState.FORM_READY:
                    self._transition(item, LifecycleEvent.REVIEW_ACCEPTED)
            persistence.save_item(item, self.ws)
        return status

    # -- processing --------------------------------------------------------

    def process_item(self, item_id: str, action_name: str) -> ProcessTicket:
        item = self.get_item(item_id)
        with self._item_lock(item_id):
            if item.state not in (
                ItemState.READY_TO_PROCESS,
                ItemState.PROCESSED,
                ItemState.PROCESS_ERROR,
            ):
                raise WrongState(
                    f"cannot process item in state {item.state.value}"
                )
            if action_name not in item.form.actions:
                raise WrongState(
                    f"action {action_name!r} not offered by this item's form"
                )
            self._transition(item, LifecycleEvent.PROCESS_STARTED)
            ticket = ProcessTicket(ticket_id=uuid.uuid4().hex[:8], item_id=item_id)
            with self._lock:
                self._tickets[ticket.ticket_id] = ticket
                self._active[item_id] = ticket
        worker = threading.Thread(
            target=self._run_pipeline, args=(item, ticket, action_name), daemon=True
        )
        worker.start()
        ticket._thread = worker
        return ticket

    def _pipeline_steps(self, item: ItemRecord, action_name: str):
        descriptor = self.item_types.get(item.type_id)
        if descriptor.pipeline:
            return descriptor.pipeline
        from .model import PipelineStep

        return [PipelineStep(action=action_name)]

    def _run_pipeline(self, item: ItemRecord, ticket: ProcessTicket,
                      action_name: str):
        failure = None
        try:
            steps = self._pipeline_steps(item, action_name)
            ctx: dict = {
                "engine": self,
                "workspace": self.ws,
                "item": item,
                "ticket": ticket,
            }
            for index, step in enumerate(steps, start=1):
                if ticket.cancel_requested:
                    break
                try:
                    spec = self.actions.get(step.action)
                except UnknownAction as exc:
                    failure = f"stage {index} ({step.action}): {exc}"
                    break
                data = {}
                for param, ref in step.bindings.items():
                    data[param] = item.form.value(ref)
                ctx["data"] = data
                run = spec.new_run()
                ticket.current_run = run
                try:
                    run.execute(ctx)
                except ActionFailure as exc:
                    failure = f"stage {index} ({step.action}): {exc}"
                    break
                except Exception as exc:
                    failure = f"stage {index} ({step.action}): internal error: {exc}"
                    break
                finally:
                    ticket.current_run = None
        finally:
            with self._item_lock(item.id):
                if ticket.cancel_requested:
                    self._transition(item, LifecycleEvent.CANCELLED, persist=True)
                elif failure is not None:
                    ticket.message = failure
                    self._transition(item, LifecycleEvent.PROCESS_FAILED, persist=True)
                else:
                    self._transition(
                        item, LifecycleEvent.PROCESS_SUCCEEDED, persist=True
                    )
                ticket.result_state = item.state
            with self._lock:
                if self._active.get(item.id) is ticket:
                    del self._active[item.id]
            ticket.done.set()

    def cancel_item(self, item_id: str) -> ItemState:
        item = self.get_item(item_id)
        with self._lock:
            ticket = self._active.get(item_id)
        if item.state is not ItemState.PROCESSING or ticket is None:
            raise WrongState(f"item is not Processing (state={item.state.value})")
        ticket.cancel_requested = True
        # the run may not be installed yet; wait briefly for it before killing
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline and not ticket.done.is_set():
            run = ticket.current_run
            if run is not None:
                run.kill()
                break
            ticket.wait(timeout=0.01)
        ticket.wait(timeout=10)
        return self.get_item(item_id).state

    def reopen_item(self, item_id: str) -> ItemRecord:
        item = self.get_item(item_id)
        with self._item_lock(item_id):
            self._transition(item, LifecycleEvent.REOPEN, persist=True)
        return item

    # -- status ------------------------------------------------------------

    def note_job(self, item_id: str, job_id: str):
        with self._lock:
            self._latest_job[item_id] = job_id

    def _persisted_job(self, item: ItemRecord) -> dict | None:
        """Latest job.json written for this item by an earlier engine run."""
        try:
            project_dir = self.ws.resolve(item.project)
        except Exception:
            return None
        best = None
        best_mtime = -1.0
        for path in project_dir.glob("*/job.json"):
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError):
                continue
            if doc.get("item_id") != item.id:
                continue
            mtime = path.stat().st_mtime
            if mtime > best_mtime:
                best, best_mtime = doc.get("job"), mtime
        return best

    def status_snapshot(self, item_id: str) -> dict:
        item = self.get_item(item_id)
        with self._lock:
            job_id = self._latest_job.get(item_id)
            ticket = self._active.get(item_id)
        if job_id:
            job = self.jobs.poll(job_id).to_dict()
        else:
            job = self._persisted_job(item)
        doc = {
            "item_id": item.id,
            "state": item.state.value,
            "job": job,
        }
        if ticket is None:
            last = None
            for t in self._tickets.values():
                if t.item_id == item_id and t.done.is_set():
                    last = t
            if last is not None and last.message:
                doc["message"] = last.message
        return doc
