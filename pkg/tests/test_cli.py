import json

import pytest

from conftest import write_script
from forgeflow import Engine
from forgeflow.cli import main, scaffold_item
from forgeflow.errors import AlreadyExists, InvalidName
from forgeflow.persistence import deserialize_descriptor


@pytest.fixture
def run(ws, capsys):
    ws.mkdir(parents=True, exist_ok=True)

    def _run(*argv):
        code = main(["--workspace", str(ws), *argv])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return _run


def create_echo_item(run):
    code, out, _ = run("create", "job_launch", "--project", "proj1")
    assert code == 0
    item_id = out.strip()
    assert run("set", item_id, "job.executable=echo", "job.args=hello")[0] == 0
    return item_id


class TestBasics:
    def test_types_lists_builtins(self, run):
        code, out, _ = run("types")
        assert code == 0
        ids = [line.split("\t")[0] for line in out.strip().splitlines()]
        assert ids == sorted(ids)
        assert len(ids) == 5
        assert "job_launch" in ids

    def test_types_json(self, run):
        code, out, _ = run("--json", "types")
        assert code == 0
        assert len(json.loads(out)) == 5

    def test_create_show(self, run):
        item_id = create_echo_item(run)
        code, out, _ = run("show", item_id)
        assert code == 0
        assert "state: FormReady" in out
        assert "job.executable = echo" in out

    def test_bad_set_then_submit_fails(self, run):
        item_id = create_echo_item(run)
        assert run("set", item_id, "job.threshold=abc")[0] == 0
        code, out, err = run("submit", item_id)
        assert code == 1
        assert "not an integer" in err

    def test_submit_accept(self, run):
        item_id = create_echo_item(run)
        code, out, _ = run("submit", item_id)
        assert code == 0
        assert "Accepted" in out

    def test_unknown_type_is_user_error(self, run):
        code, _, err = run("create", "nope", "--project", "p")
        assert code == 1
        assert "UnknownType" in err

    def test_process_watch_echo(self, run):
        item_id = create_echo_item(run)
        assert run("submit", item_id)[0] == 0
        code, out, _ = run(
            "process", item_id, "--action", "Launch the Job", "--watch"
        )
        assert code == 0
        assert "hello" in out
        assert "Processed" in out

    def test_status_json(self, run, ws):
        item_id = create_echo_item(run)
        run("submit", item_id)
        run("process", item_id, "--action", "Launch the Job")
        code, out, _ = run("--json", "status", item_id)
        assert code == 0
        snap = json.loads(out)
        assert snap["state"] == "Processed"
        assert snap["job"]["status"] == "Finished"


class TestScaffold:
    def test_scaffold_then_listable(self, run, ws):
        code, out, _ = run("scaffold", "my_sim")
        assert code == 0
        code, out, _ = run("types")
        assert "my_sim" in out

    def test_scaffold_twice_collides(self, ws):
        ws.mkdir(parents=True, exist_ok=True)
        scaffold_item(str(ws), "my_sim")
        with pytest.raises(AlreadyExists):
            scaffold_item(str(ws), "my_sim")

    def test_invalid_name(self, ws):
        ws.mkdir(parents=True, exist_ok=True)
        with pytest.raises(InvalidName):
            scaffold_item(str(ws), "bad name!")

    def test_stub_passes_loader_validation(self, ws):
        ws.mkdir(parents=True, exist_ok=True)
        path = scaffold_item(str(ws), "my_sim")
        descriptor = deserialize_descriptor(
            open(path, encoding="utf-8").read()
        )
        assert descriptor.type_id == "my_sim"
        engine = Engine(ws)
        assert "my_sim" in [t for t, _ in engine.list_item_types()]
        assert engine.diagnostics == []
        # the stub is immediately usable end to end
        item = engine.create_item("my_sim", "proj1")
        engine.update_form(item.id, {"main.command": "echo"})
        assert engine.review_form(item.id).accepted


class TestScript:
    def _write(self, ws, name, text):
        ws.mkdir(parents=True, exist_ok=True)
        path = ws / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_empty_script(self, run, ws):
        path = self._write(ws, "empty.ffs", "\n# just a comment\n\n")
        assert run("script", path)[0] == 0

    def test_end_to_end_script(self, run, ws):
        write_script(ws, "proj1/hello.py", "print('scripted hello')\n")
        path = self._write(
            ws,
            "study.ffs",
            "\n".join(
                [
                    "create job_launch --project proj1 --name scripted",
                    "types",
                ]
            )
            + "\n",
        )
        assert run("script", path)[0] == 0
        engine = Engine(ws)
        items = engine.list_items()
        assert len(items) == 1
        item_id = items[0].id
        path2 = self._write(
            ws,
            "study2.ffs",
            "\n".join(
                [
                    f"set {item_id} job.executable=echo job.args=scripted",
                    f"submit {item_id}",
                    f"process {item_id} --action 'Launch the Job'",
                ]
            )
            + "\n",
        )
        assert run("script", path2)[0] == 0
        assert Engine(ws).get_item(item_id).state.value == "Processed"

    def test_failure_aborts_with_line_number(self, run, ws):
        path = self._write(
            ws,
            "bad.ffs",
            "\n".join(
                [
                    "types",
                    "types",
                    "create nope --project p",
                    "create job_launch --project late1",
                    "create job_launch --project late2",
                ]
            )
            + "\n",
        )
        code, _, err = run("script", path)
        assert code == 1
        assert "script failed at line 3" in err
        # lines 4-5 never executed
        assert Engine(ws).list_items() == []

    def test_script_linearity(self, run, ws):
        """Script effects equal the same commands run one at a time."""
        lines = [
            "create job_launch --project proj1 --name a",
            "create data_reduction --project proj1 --name b",
        ]
        path = self._write(ws, "lin.ffs", "\n".join(lines) + "\n")
        assert run("script", path)[0] == 0
        scripted = sorted(
            (i.type_id, i.name, i.state.value) for i in Engine(ws).list_items()
        )

        ws2 = ws.parent / "ws_manual"
        code = main(["--workspace", str(ws2), *lines[0].split()])
        assert code == 0
        assert main(["--workspace", str(ws2), *lines[1].split()]) == 0
        manual = sorted(
            (i.type_id, i.name, i.state.value) for i in Engine(ws2).list_items()
        )
        assert scripted == manual
