"""Command-line client for the engine (embedded, no server required).

Output is line-oriented and stable for scripting; read commands accept
``--json`` for canonical JSON.  Exit codes: 0 success, 1 user error,
2 engine error.
"""

from __future__ import annotations

import re
import shlex
import sys
from pathlib import Path

import click

from .engine import Engine
from .errors import AlreadyExists, ForgeflowError, InvalidName
from .model import ItemState
from .persistence import DESCRIPTOR_SUFFIX, canonical_json
from .server import DEFAULT_PORT, ApiConfig, serve

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

SCAFFOLD_NOTE = (
    "Stub item type. Edit the form template and pipeline to fit your "
    "workflow; the file is picked up on the next engine start or type "
    "listing."
)


class UserFailure(ForgeflowError):
    """User-level failure that is not an engine bug (exit code 1)."""


def scaffold_item(workspace: str, name: str) -> str:
    """Write a loadable descriptor stub into <workspace>/.items/."""
    if not _NAME_RE.match(name):
        raise InvalidName(f"not a valid identifier: {name!r}")
    ws_root = Path(workspace)
    path = ws_root / ".items" / f"{name}{DESCRIPTOR_SUFFIX}"
    if path.exists():
        raise AlreadyExists(f"descriptor already exists: {path.name}")
    doc = {
        "schema_version": 1,
        "type_id": name,
        "display_name": name.replace("_", " ").title(),
        "form_template": {
            "item_id": "",
            "description": SCAFFOLD_NOTE,
            "groups": [
                {
                    "name": "main",
                    "entries": [
                        {
                            "name": "command",
                            "kind": "text",
                            "value": "",
                            "allowed": None,
                            "required": True,
                            "description": "Executable to launch; workspace "
                                           "path or command name",
                        }
                    ],
                }
            ],
            "actions": ["Launch the Job"],
        },
        "pipeline": [
            {
                "action": "Launch the Job",
                "bindings": {"executable": "main.command"},
            }
        ],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(doc), encoding="utf-8")
    return str(path)


@click.group()
@click.option(
    "--workspace",
    envvar="FORGEFLOW_WORKSPACE",
    required=True,
    help="Workspace root directory (or FORGEFLOW_WORKSPACE).",
)
@click.option("--json", "as_json", is_flag=True, help="Canonical JSON output.")
@click.pass_context
def cli(ctx, workspace, as_json):
    """Human-in-the-loop workflow engine."""
    ctx.obj = {"workspace": workspace, "json": as_json}


def _engine(ctx) -> Engine:
    return Engine(ctx.obj["workspace"])


@cli.command()
@click.pass_context
def types(ctx):
    """List available item types."""
    listing = _engine(ctx).list_item_types()
    if ctx.obj["json"]:
        click.echo(
            canonical_json(
                [{"type_id": t, "display_name": n} for t, n in listing]
            ),
            nl=False,
        )
    else:
        for type_id, display_name in listing:
            click.echo(f"{type_id}\t{display_name}")


@cli.command()
@click.argument("type_id")
@click.option("--project", required=True)
@click.option("--name", default="")
@click.pass_context
def create(ctx, type_id, project, name):
    """Create a new item of TYPE_ID inside a project."""
    item = _engine(ctx).create_item(type_id, project, name)
    if ctx.obj["json"]:
        click.echo(canonical_json(item.to_dict()), nl=False)
    else:
        click.echo(item.id)


@cli.command()
@click.argument("item_id")
@click.pass_context
def show(ctx, item_id):
    """Show an item record."""
    item = _engine(ctx).get_item(item_id)
    if ctx.obj["json"]:
        click.echo(canonical_json(item.to_dict()), nl=False)
        return
    click.echo(f"id: {item.id}")
    click.echo(f"type: {item.type_id}")
    click.echo(f"name: {item.name}")
    click.echo(f"state: {item.state.value}")
    click.echo(f"project: {item.project}")
    for group, entry in item.form.iter_entries():
        click.echo(f"  {group.name}.{entry.name} = {entry.value}")


@cli.command("set")
@click.argument("item_id")
@click.argument("assignments", nargs=-1, required=True)
@click.pass_context
def set_entries(ctx, item_id, assignments):
    """Set form entries: group.entry=value ..."""
    edits = {}
    for assignment in assignments:
        if "=" not in assignment:
            raise UserFailure(f"expected group.entry=value, got {assignment!r}")
        ref, value = assignment.split("=", 1)
        edits[ref] = value
    _engine(ctx).update_form(item_id, edits)
    click.echo("ok")


@cli.command()
@click.argument("item_id")
@click.pass_context
def submit(ctx, item_id):
    """Review the item's form; accepted forms become ready to process."""
    status = _engine(ctx).review_form(item_id)
    for message in status.messages:
        click.echo(message, err=True)
    click.echo(status.verdict)
    if not status.accepted:
        raise UserFailure("form rejected")


@cli.command()
@click.argument("item_id")
@click.option("--action", "action_name", required=True)
@click.option("--watch", is_flag=True, help="Stream job events to stdout.")
@click.pass_context
def process(ctx, item_id, action_name, watch):
    """Process an item; blocks until the run reaches a terminal state."""
    engine = _engine(ctx)
    ticket = engine.process_item(item_id, action_name)
    if watch:
        job_id = None
        while job_id is None:
            snap = engine.status_snapshot(item_id)
            if snap.get("job"):
                job_id = snap["job"]["job_id"]
            elif ticket.done.is_set():
                break
            else:
                ticket.wait(0.05)
        if job_id is not None:
            for ev in engine.jobs.stream_events(job_id, 0, follow=True):
                if ev.kind in ("stdout", "stderr"):
                    click.echo(ev.payload)
                else:
                    click.echo(f"[{ev.kind}] {ev.payload}")
    ticket.wait()
    state = engine.get_item(item_id).state
    click.echo(state.value)
    if state is not ItemState.PROCESSED:
        raise UserFailure(ticket.message or f"terminal state {state.value}")


@cli.command()
@click.argument("item_id")
@click.pass_context
def status(ctx, item_id):
    """Composite status: item state plus latest job, if any."""
    snap = _engine(ctx).status_snapshot(item_id)
    if ctx.obj["json"]:
        click.echo(canonical_json(snap), nl=False)
    else:
        click.echo(f"state: {snap['state']}")
        job = snap.get("job")
        if job:
            click.echo(f"job: {job['job_id']} {job['status']}")


@cli.command()
@click.argument("item_id")
@click.pass_context
def cancel(ctx, item_id):
    """Cancel a Processing item."""
    state = _engine(ctx).cancel_item(item_id)
    click.echo(state.value)


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=DEFAULT_PORT, type=int)
@click.option("--token", default=None)
@click.pass_context
def serve_cmd(ctx, host, port, token):
    """Run the headless HTTP server."""
    serve(ApiConfig(workspace=ctx.obj["workspace"], host=host, port=port,
                    token=token))


cli.add_command(serve_cmd, name="serve")


@cli.command()
@click.argument("name")
@click.pass_context
def scaffold(ctx, name):
    """Generate a descriptor stub for a new item type."""
    click.echo(scaffold_item(ctx.obj["workspace"], name))


@cli.command()
@click.argument("script_file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def script(ctx, script_file):
    """Run a line-oriented batch script of CLI commands."""
    lines = Path(script_file).read_text(encoding="utf-8").splitlines()
    base = ["--workspace", ctx.obj["workspace"]]
    if ctx.obj["json"]:
        base.append("--json")
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        code = main(base + shlex.split(stripped))
        if code != 0:
            click.echo(f"script failed at line {lineno}", err=True)
            raise UserFailure(f"script failed at line {lineno}")


def main(argv=None) -> int:
    """Dispatch with documented exit codes; usable programmatically."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except UserFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ForgeflowError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:  # engine bug
        click.echo(f"internal error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
