"""Builtin item types and actions.

Covers the four everyday workflow activities (input generation, job launch,
data reduction, data management) plus a chained "full study" that strings
them together over one form.
"""

from __future__ import annotations

import csv
import re
import shlex
import shutil
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from .connectors import FaultSpec
from .errors import (
    ActionFailure,
    DuplicateDest,
    IoFailure,
    MalformedCsv,
    UnknownPlaceholder,
)
from .jobs import DEFAULT_RETRIEVE_THRESHOLD, JobProfile, JobStatus
from .model import (
    Entry,
    EntryGroup,
    EntryKind,
    Form,
    ItemDescriptor,
    PipelineStep,
)
from .persistence import WorkspaceRef, atomic_write_text, canonical_json
from .registry import ActionRun, ActionSpec

PLACEHOLDER_RE = re.compile(r"\$\{([A-Za-z0-9_]+\.[A-Za-z0-9_]+)\}")


# -- templating -------------------------------------------------------------

def render_template(template_text: str, form: Form) -> str:
    """Replace every ``${group.entry}`` token with the entry's value.

    Unknown tokens are an error, never silently left in place.
    """

    def replace(match: re.Match) -> str:
        ref = match.group(1)
        entry = form.entry(ref)
        if entry is None:
            raise UnknownPlaceholder(f"unknown placeholder: ${{{ref}}}")
        return entry.value

    return PLACEHOLDER_RE.sub(replace, template_text)


def write_input_set(
    ws: WorkspaceRef,
    project: str,
    template_rel: str,
    output_name: str,
    manifest_name: str,
    form: Form,
) -> str:
    """Render the template and write the manifest; returns manifest rel path."""
    template_path = ws.resolve(template_rel)
    if not template_path.is_file():
        raise IoFailure(f"template not found: {template_rel}")
    rendered = render_template(template_path.read_text(encoding="utf-8"), form)
    output_rel = f"{project}/{output_name}"
    atomic_write_text(ws.resolve(output_rel), rendered)
    manifest_rel = f"{project}/{manifest_name}"
    manifest = {"files": sorted([template_rel, output_rel]), "main": output_rel}
    atomic_write_text(ws.resolve(manifest_rel), canonical_json(manifest))
    return manifest_rel


# -- data reduction ---------------------------------------------------------

@dataclass
class ColumnStats:
    name: str
    count: int
    min: float
    max: float
    mean: float
    sum: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "count": self.count,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "sum": self.sum,
        }


@dataclass
class ReductionReport:
    source: str
    row_count: int
    columns: list[ColumnStats] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "row_count": self.row_count,
            "columns": [c.to_dict() for c in self.columns],
        }


def reduce_columns(ws: WorkspaceRef, csv_rel: str) -> ReductionReport:
    """Per-column count/min/max/mean/sum over a rectangular numeric CSV.

    The report is written next to the source as ``<stem>.report.json``.
    """
    path = ws.resolve(csv_rel)
    if not path.is_file():
        raise MalformedCsv(f"file not found: {csv_rel}")
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv("empty file: no header row") from None
        if not header:
            raise MalformedCsv("empty header row")
        sums = [0.0] * len(header)
        mins = [float("inf")] * len(header)
        maxs = [float("-inf")] * len(header)
        rows = 0
        for row_idx, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedCsv(
                    f"ragged row at line {row_idx}: expected {len(header)} "
                    f"cells, got {len(row)}",
                    row=row_idx,
                )
            for col_idx, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise MalformedCsv(
                        f"non-numeric cell at line {row_idx}, "
                        f"column {header[col_idx]!r}: {cell!r}",
                        row=row_idx,
                        column=header[col_idx],
                    ) from None
                sums[col_idx] += value
                mins[col_idx] = min(mins[col_idx], value)
                maxs[col_idx] = max(maxs[col_idx], value)
            rows += 1
    if rows == 0:
        raise MalformedCsv("no data rows")
    report = ReductionReport(source=csv_rel, row_count=rows)
    for i, name in enumerate(header):
        report.columns.append(
            ColumnStats(
                name=name,
                count=rows,
                min=mins[i],
                max=maxs[i],
                mean=sums[i] / rows,
                sum=sums[i],
            )
        )
    report_rel = str(Path(csv_rel).with_suffix("")) + ".report.json"
    atomic_write_text(ws.resolve(report_rel), canonical_json(report.to_dict()))
    return report


# -- data management --------------------------------------------------------

def _expand_sources(ws: WorkspaceRef, sources: list[str]) -> list[str]:
    """Expand directory sources to their contained files, workspace-relative."""
    out: list[str] = []
    for rel in sources:
        path = ws.resolve(rel)
        if path.is_dir():
            for p in sorted(path.rglob("*")):
                if p.is_file():
                    out.append(ws.relative(p))
        elif path.is_file():
            out.append(rel)
        else:
            raise IoFailure(f"source not found: {rel}")
    return out


def manage_data(ws: WorkspaceRef, op: str, sources: list[str], dest: str) -> str:
    """copy/move into a destination directory, or archive into a ZIP file."""
    files = _expand_sources(ws, sources)
    if op == "archive":
        dest_path = ws.resolve(dest)
        if dest_path.exists():
            raise DuplicateDest(f"destination exists: {dest}")
        dest_path.parent.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(dest_path, "w", zipfile.ZIP_DEFLATED) as zf:
            for rel in files:
                zf.write(ws.resolve(rel), arcname=rel)
        return dest
    if op not in ("copy", "move"):
        raise IoFailure(f"unsupported operation: {op}")
    dest_dir = ws.resolve(dest)
    dest_dir.mkdir(parents=True, exist_ok=True)
    for rel in files:
        target = dest_dir / Path(rel).name
        if target.exists():
            raise DuplicateDest(f"destination exists: {ws.relative(target)}")
        if op == "copy":
            shutil.copy2(ws.resolve(rel), target)
        else:
            shutil.move(str(ws.resolve(rel)), target)
    return dest


# -- actions ----------------------------------------------------------------

def _split_paths(value: str) -> list[str]:
    return [p.strip() for p in value.split(";") if p.strip()]


def _build_profile(ctx: dict, data: dict) -> JobProfile:
    item = ctx["item"]
    executable = data.get("executable", "")
    if not executable:
        raise ActionFailure("no executable configured")
    threshold = data.get("threshold", "")
    faults = None
    if data.get("latency_ms") or data.get("failure_probability"):
        faults = FaultSpec(
            latency_ms=int(data.get("latency_ms") or 0),
            failure_probability=float(data.get("failure_probability") or 0.0),
            seed=int(data.get("fault_seed") or 0),
        )
    file_entries = [
        e.value
        for _, e in item.form.iter_entries()
        if e.kind is EntryKind.FILE and e.value
    ]
    return JobProfile(
        executable=executable,
        args=shlex.split(data.get("args", "")),
        input_files=_split_paths(data.get("input_files", "")),
        connector_id=data.get("connector") or "local",
        working_project=item.project,
        retrieve_threshold_bytes=(
            int(threshold) if threshold else DEFAULT_RETRIEVE_THRESHOLD
        ),
        file_entries=file_entries,
        faults=faults,
    )


class LaunchJobRun(ActionRun):
    """Launches one job and blocks until it reaches a terminal status."""

    def __init__(self):
        self._jobs = None
        self._job_id = None

    def execute(self, ctx: dict):
        engine = ctx["engine"]
        profile = _build_profile(ctx, ctx["data"])
        self._jobs = engine.jobs
        ticket = ctx.get("ticket")
        if ticket is not None and ticket.cancel_requested:
            raise ActionFailure("cancelled before launch")
        handle = engine.jobs.launch(profile)
        self._job_id = handle.job_id
        if ticket is not None and ticket.cancel_requested:
            engine.jobs.kill(handle.job_id)  # cancel raced the launch
        engine.note_job(ctx["item"].id, handle.job_id)
        ctx["last_job_id"] = handle.job_id
        ctx["last_job_dir"] = f"{profile.working_project}/{handle.job_id}"
        final = engine.jobs.wait(handle.job_id)
        # durable record so `status` works from a later engine instance
        atomic_write_text(
            ctx["workspace"].resolve(f"{ctx['last_job_dir']}/job.json"),
            canonical_json({"item_id": ctx["item"].id, "job": final.to_dict()}),
        )
        if final.status is JobStatus.FAILED:
            tail = [e.payload for e in engine.jobs.events(handle.job_id)
                    if e.kind == "stderr"][-3:]
            raise ActionFailure(
                f"job {handle.job_id} failed"
                + (f" (exit {final.exit_code})" if final.exit_code else "")
                + (": " + " | ".join(tail) if tail else "")
            )
        if final.status is JobStatus.CANCELLED:
            raise ActionFailure(f"job {handle.job_id} cancelled")

    def kill(self):
        if self._jobs is not None and self._job_id is not None:
            self._jobs.kill(self._job_id)


class RenderInputRun(ActionRun):
    def execute(self, ctx: dict):
        item = ctx["item"]
        data = ctx["data"]
        try:
            manifest_rel = write_input_set(
                ctx["workspace"],
                item.project,
                data.get("template", ""),
                data.get("output_name") or "input.rendered",
                data.get("manifest_name") or "manifest.json",
                item.form,
            )
        except (UnknownPlaceholder, IoFailure) as exc:
            raise ActionFailure(str(exc)) from exc
        ctx["manifest_rel"] = manifest_rel


class ReduceDataRun(ActionRun):
    def execute(self, ctx: dict):
        ws = ctx["workspace"]
        rel = ctx["data"].get("csv_file", "")
        if not rel:
            raise ActionFailure("no csv file configured")
        candidates = [rel]
        if "last_job_dir" in ctx:
            candidates.append(f"{ctx['last_job_dir']}/{rel}")
        for candidate in candidates:
            try:
                if ws.resolve(candidate).is_file():
                    ctx["report"] = reduce_columns(ws, candidate)
                    return
            except Exception:
                continue
        raise ActionFailure(f"csv file not found: {rel}")


class ManageDataRun(ActionRun):
    def execute(self, ctx: dict):
        data = ctx["data"]
        try:
            manage_data(
                ctx["workspace"],
                data.get("op", ""),
                _split_paths(data.get("sources", "")),
                data.get("dest", ""),
            )
        except Exception as exc:
            raise ActionFailure(str(exc)) from exc


class FullStudyRun(ActionRun):
    """Chained pipeline: render input, launch, reduce an output, archive."""

    STAGES = ("render input", "launch job", "reduce data", "archive")

    def __init__(self):
        self._launch = LaunchJobRun()

    def execute(self, ctx: dict):
        ws = ctx["workspace"]
        item = ctx["item"]
        data = ctx["data"]

        def fail(stage_index: int, exc: Exception):
            raise ActionFailure(
                f"stage {stage_index} ({self.STAGES[stage_index - 1]}): {exc}"
            ) from exc

        try:
            manifest_rel = write_input_set(
                ws,
                item.project,
                data.get("template", ""),
                data.get("output_name") or "input.rendered",
                data.get("manifest_name") or "manifest.json",
                item.form,
            )
        except Exception as exc:
            fail(1, exc)

        output_rel = f"{item.project}/{data.get('output_name') or 'input.rendered'}"
        launch_ctx = dict(ctx)
        launch_ctx["data"] = {
            "executable": data.get("executable", ""),
            "args": data.get("args", ""),
            "connector": data.get("connector", ""),
            "threshold": data.get("threshold", ""),
            "input_files": ";".join([output_rel, manifest_rel]),
        }
        try:
            self._launch.execute(launch_ctx)
        except ActionFailure as exc:
            if ctx["ticket"].cancel_requested:
                raise
            fail(2, exc)
        job_dir = launch_ctx["last_job_dir"]

        csv_name = data.get("csv_output", "")
        csv_rel = f"{job_dir}/{csv_name}"
        try:
            report = reduce_columns(ws, csv_rel)
        except Exception as exc:
            fail(3, exc)

        report_rel = str(Path(csv_rel).with_suffix("")) + ".report.json"
        archive_dest = data.get("archive_dest") or f"{item.project}/study.zip"
        try:
            manage_data(
                ws,
                "archive",
                [manifest_rel, output_rel, csv_rel, report_rel],
                archive_dest,
            )
        except Exception as exc:
            fail(4, exc)
        ctx["report"] = report
        ctx["archive_rel"] = archive_dest

    def kill(self):
        self._launch.kill()


# -- descriptors ------------------------------------------------------------

def _job_group(include_inputs: bool = True) -> EntryGroup:
    entries = [
        Entry("executable", EntryKind.EXECUTABLE, required=True,
              description="Program to run; workspace path or command name"),
        Entry("args", EntryKind.TEXT, description="Command-line arguments"),
        Entry("connector", EntryKind.CHOICE, value="local",
              allowed=["local", "sim-remote"],
              description="Where the job executes"),
        Entry("threshold", EntryKind.INTEGER,
              value=str(DEFAULT_RETRIEVE_THRESHOLD),
              description="Max total output bytes retrieved automatically"),
    ]
    if include_inputs:
        entries.append(
            Entry("input_files", EntryKind.TEXT,
                  description="Semicolon-separated workspace-relative inputs")
        )
    return EntryGroup("job", entries)


def builtin_descriptors() -> list[ItemDescriptor]:
    launch_bindings = {
        "executable": "job.executable",
        "args": "job.args",
        "connector": "job.connector",
        "threshold": "job.threshold",
        "input_files": "job.input_files",
    }
    template_group = EntryGroup(
        "template",
        [
            Entry("template_file", EntryKind.FILE, required=True,
                  description="Template with ${group.entry} placeholders"),
            Entry("output_name", EntryKind.TEXT, value="input.rendered",
                  required=True, description="Rendered file name"),
            Entry("manifest_name", EntryKind.TEXT, value="manifest.json",
                  required=True, description="Manifest file name"),
        ],
    )
    return [
        ItemDescriptor(
            type_id="input_generation",
            display_name="Input Generation",
            form_template=Form(
                description="Render a templated input set into the project",
                groups=[template_group],
                actions=["Render the Input"],
            ),
            pipeline=[
                PipelineStep(
                    "Render the Input",
                    {
                        "template": "template.template_file",
                        "output_name": "template.output_name",
                        "manifest_name": "template.manifest_name",
                    },
                )
            ],
        ),
        ItemDescriptor(
            type_id="job_launch",
            display_name="Job Launch",
            form_template=Form(
                description="Launch an executable locally or on the "
                            "simulated remote host",
                groups=[
                    _job_group(),
                    EntryGroup(
                        "files",
                        [
                            Entry("main_input", EntryKind.FILE,
                                  description="Primary input file; project-"
                                              "local files are auto-staged"),
                        ],
                    ),
                ],
                actions=["Launch the Job"],
            ),
            pipeline=[PipelineStep("Launch the Job", launch_bindings)],
        ),
        ItemDescriptor(
            type_id="data_reduction",
            display_name="Data Reduction",
            form_template=Form(
                description="Column statistics over a numeric CSV file",
                groups=[
                    EntryGroup(
                        "analysis",
                        [Entry("csv_file", EntryKind.FILE, required=True,
                               description="CSV file with a header row")],
                    )
                ],
                actions=["Reduce the Data"],
            ),
            pipeline=[
                PipelineStep("Reduce the Data", {"csv_file": "analysis.csv_file"})
            ],
        ),
        ItemDescriptor(
            type_id="data_management",
            display_name="Data Management",
            form_template=Form(
                description="Copy, move, or archive workspace files",
                groups=[
                    EntryGroup(
                        "manage",
                        [
                            Entry("operation", EntryKind.CHOICE, value="copy",
                                  allowed=["copy", "move", "archive"],
                                  required=True),
                            Entry("sources", EntryKind.TEXT, required=True,
                                  description="Semicolon-separated sources"),
                            Entry("dest", EntryKind.TEXT, required=True,
                                  description="Destination dir or archive path"),
                        ],
                    )
                ],
                actions=["Manage the Data"],
            ),
            pipeline=[
                PipelineStep(
                    "Manage the Data",
                    {
                        "op": "manage.operation",
                        "sources": "manage.sources",
                        "dest": "manage.dest",
                    },
                )
            ],
        ),
        ItemDescriptor(
            type_id="full_study",
            display_name="Full Study",
            form_template=Form(
                description="Chained study: render input, launch, reduce, "
                            "archive",
                groups=[
                    template_group,
                    _job_group(include_inputs=False),
                    EntryGroup(
                        "analysis",
                        [Entry("csv_output", EntryKind.TEXT, value="out.csv",
                               required=True,
                               description="CSV the job writes in its "
                                           "directory")],
                    ),
                    EntryGroup(
                        "manage",
                        [Entry("archive_dest", EntryKind.TEXT,
                               value="study.zip", required=True,
                               description="Workspace-relative archive path")],
                    ),
                ],
                actions=["Run the Full Study"],
            ),
            pipeline=[
                PipelineStep(
                    "Run the Full Study",
                    {
                        "template": "template.template_file",
                        "output_name": "template.output_name",
                        "manifest_name": "template.manifest_name",
                        "executable": "job.executable",
                        "args": "job.args",
                        "connector": "job.connector",
                        "threshold": "job.threshold",
                        "csv_output": "analysis.csv_output",
                        "archive_dest": "manage.archive_dest",
                    },
                )
            ],
        ),
    ]


def install(engine):
    """Register builtin actions and item descriptors on a fresh engine."""
    engine.register_action(
        ActionSpec("Launch the Job", LaunchJobRun,
                   description="Run an executable over a connector")
    )
    engine.register_action(
        ActionSpec("Render the Input", RenderInputRun,
                   description="Render a template and write the manifest")
    )
    engine.register_action(
        ActionSpec("Reduce the Data", ReduceDataRun,
                   description="Column statistics over a CSV file")
    )
    engine.register_action(
        ActionSpec("Manage the Data", ManageDataRun,
                   description="Copy, move, or archive files")
    )
    engine.register_action(
        ActionSpec("Run the Full Study", FullStudyRun,
                   description="Input, launch, analysis, and archival chained")
    )
    for descriptor in builtin_descriptors():
        engine.register_item_descriptor(descriptor)
