import random
import threading
import time

import pytest

from conftest import SLEEPER, write_script
from forgeflow.connectors import FaultSpec, make_connector
from forgeflow.errors import TransportFailure, UnknownConnector, UnknownJob
from forgeflow.jobs import JobManager, JobProfile, JobStatus
from forgeflow.persistence import WorkspaceRef


@pytest.fixture
def manager(ws):
    ws.mkdir(parents=True, exist_ok=True)
    (ws / "proj1").mkdir(exist_ok=True)
    return JobManager(WorkspaceRef(ws))


def echo_profile(**kw):
    defaults = dict(executable="echo", args=["hello"], working_project="proj1")
    defaults.update(kw)
    return JobProfile(**defaults)


class TestLaunch:
    def test_echo_finishes(self, manager):
        h = manager.launch(echo_profile())
        final = manager.wait(h.job_id, timeout=10)
        assert final.status is JobStatus.FINISHED
        assert final.exit_code == 0
        stdout = [e for e in manager.events(h.job_id) if e.kind == "stdout"]
        assert [e.payload for e in stdout] == ["hello"]

    def test_spawn_failure(self, manager):
        h = manager.launch(echo_profile(executable="definitely_not_a_binary"))
        final = manager.wait(h.job_id, timeout=10)
        assert final.status is JobStatus.FAILED
        diag = [e for e in manager.events(h.job_id) if e.kind == "stderr"]
        assert any("SpawnFailure" in e.payload for e in diag)

    def test_nonzero_exit_fails(self, manager, ws):
        rel = write_script(ws, "proj1/boom.py", "raise SystemExit(3)\n")
        h = manager.launch(echo_profile(executable=rel, args=[]))
        final = manager.wait(h.job_id, timeout=10)
        assert final.status is JobStatus.FAILED
        assert final.exit_code == 3

    def test_unknown_connector(self, manager):
        with pytest.raises(UnknownConnector):
            manager.launch(echo_profile(connector_id="teleport"))

    def test_stdout_mirrored_to_workspace(self, manager, ws):
        h = manager.launch(echo_profile())
        manager.wait(h.job_id, timeout=10)
        mirror = ws / "proj1" / h.job_id / "stdout.txt"
        assert mirror.read_text() == "hello\n"


class TestPoll:
    def test_terminal_stability(self, manager):
        h = manager.launch(echo_profile())
        manager.wait(h.job_id, timeout=10)
        first = manager.poll(h.job_id)
        second = manager.poll(h.job_id)
        assert first.status is JobStatus.FINISHED
        assert first.exit_code == second.exit_code == 0

    def test_unknown_job(self, manager):
        with pytest.raises(UnknownJob):
            manager.poll("nope")

    def test_nonterminal_statuses_during_run(self, manager, ws):
        rel = write_script(ws, "proj1/sleeper.py", SLEEPER)
        h = manager.launch(echo_profile(executable=rel, args=[]))
        seen = set()
        deadline = time.time() + 10
        while time.time() < deadline:
            status = manager.poll(h.job_id).status
            seen.add(status)
            if status is JobStatus.RUNNING:
                break
            time.sleep(0.01)
        assert JobStatus.RUNNING in seen
        assert not seen & {JobStatus.FINISHED, JobStatus.FAILED}
        manager.kill(h.job_id)


class TestStaging:
    def test_manifest_count_conservation(self, manager, ws):
        (ws / "proj1" / "a.dat").write_text("a")
        (ws / "proj1" / "b.dat").write_text("b")
        h = manager.launch(
            echo_profile(input_files=["proj1/a.dat", "proj1/b.dat"])
        )
        manager.wait(h.job_id, timeout=10)
        staged = [e for e in manager.events(h.job_id) if e.kind == "file_staged"]
        assert len(staged) == 2
        assert {e.payload for e in staged} == {"a.dat", "b.dat"}

    def test_auto_stage_project_file_entries(self, manager, ws):
        """A file-kind entry in the item's project dir is staged even when
        it is not listed among the inputs."""
        (ws / "proj1" / "mesh.e").write_text("mesh-bytes")
        h = manager.launch(echo_profile(file_entries=["proj1/mesh.e"]))
        manager.wait(h.job_id, timeout=10)
        staged = [e.payload for e in manager.events(h.job_id)
                  if e.kind == "file_staged"]
        assert staged == ["mesh.e"]

    def test_file_entry_outside_project_not_auto_staged(self, manager, ws):
        (ws / "proj2").mkdir()
        (ws / "proj2" / "far.dat").write_text("far")
        h = manager.launch(echo_profile(file_entries=["proj2/far.dat"]))
        manager.wait(h.job_id, timeout=10)
        staged = [e for e in manager.events(h.job_id) if e.kind == "file_staged"]
        assert staged == []

    def test_no_duplicate_staging(self, manager, ws):
        (ws / "proj1" / "both.dat").write_text("x")
        h = manager.launch(
            echo_profile(
                input_files=["proj1/both.dat"], file_entries=["proj1/both.dat"]
            )
        )
        manager.wait(h.job_id, timeout=10)
        staged = [e for e in manager.events(h.job_id) if e.kind == "file_staged"]
        assert len(staged) == 1

    def test_missing_input_fails_before_running(self, manager):
        h = manager.launch(echo_profile(input_files=["proj1/nope.dat"]))
        final = manager.wait(h.job_id, timeout=10)
        assert final.status is JobStatus.FAILED
        kinds = [(e.kind, e.payload) for e in manager.events(h.job_id)]
        assert ("status", "Running") not in kinds


def walk_size_oracle(job_dir, staged_names):
    """Independent recomputation of total new-output size."""
    total = 0
    for p in job_dir.rglob("*"):
        if p.is_file() and str(p.relative_to(job_dir)) not in staged_names:
            total += p.stat().st_size
    return total


class TestRetrieval:
    def _writer_profile(self, ws, n_bytes, **kw):
        body = (
            "with open('out.bin','wb') as f:\n"
            f"    f.write(b'x' * {n_bytes})\n"
        )
        rel = write_script(ws, "proj1/writer.py", body)
        return echo_profile(executable=rel, args=[], **kw)

    @pytest.mark.parametrize("connector", ["local", "sim-remote"])
    def test_under_threshold_retrieved(self, manager, ws, connector):
        h = manager.launch(
            self._writer_profile(ws, 1024, connector_id=connector,
                                 retrieve_threshold_bytes=10 * 1024 * 1024)
        )
        final = manager.wait(h.job_id, timeout=10)
        assert final.status is JobStatus.FINISHED
        retrieved = ws / "proj1" / h.job_id / "out.bin"
        assert retrieved.is_file() and retrieved.stat().st_size == 1024

    def test_boundary_exact_threshold_retrieved(self, manager, ws):
        h = manager.launch(
            self._writer_profile(ws, 500, retrieve_threshold_bytes=500)
        )
        manager.wait(h.job_id, timeout=10)
        assert (ws / "proj1" / h.job_id / "out.bin").is_file()

    def test_boundary_threshold_plus_one_skipped(self, manager, ws):
        h = manager.launch(
            self._writer_profile(ws, 501, retrieve_threshold_bytes=500)
        )
        manager.wait(h.job_id, timeout=10)
        assert not (ws / "proj1" / h.job_id / "out.bin").exists()
        skip = [e for e in manager.events(h.job_id)
                if e.kind == "file_retrieved"]
        assert len(skip) == 1 and "skipped" in skip[0].payload

    def test_decision_matches_walk_oracle(self, manager, ws):
        """Exact byte accounting vs. an independent directory walk."""
        rng = random.Random(5)
        for threshold in (100, 2000, 5000):
            sizes = [rng.randrange(1, 2000) for _ in range(3)]
            body = "".join(
                f"open('o{i}.bin','wb').write(b'y'*{n})\n"
                for i, n in enumerate(sizes)
            )
            rel = write_script(ws, f"proj1/multi{threshold}.py", body)
            h = manager.launch(
                echo_profile(executable=rel, args=[],
                             retrieve_threshold_bytes=threshold)
            )
            manager.wait(h.job_id, timeout=10)
            job = manager._get(h.job_id)
            exec_dir = job.connector.job_dir(h.job_id)
            oracle_total = walk_size_oracle(
                exec_dir, {name for _, name in job.manifest}
            )
            assert oracle_total == sum(sizes)
            retrieved_any = any(
                (ws / "proj1" / h.job_id / f"o{i}.bin").exists()
                for i in range(3)
            )
            assert retrieved_any == (oracle_total <= threshold)


class TestConnectorEquivalence:
    def test_identical_event_payloads_and_bytes(self, manager, ws):
        body = (
            "import sys\n"
            "data = open('seed.txt').read().strip()\n"
            "print('seed', data)\n"
            "open('result.txt','w').write(data * 3)\n"
            "sys.stderr.write('warn once\\n')\n"
        )
        rel = write_script(ws, "proj1/equiv.py", body)
        (ws / "proj1" / "seed.txt").write_text("abc123\n")
        results = {}
        for connector in ("local", "sim-remote"):
            h = manager.launch(
                echo_profile(
                    executable=rel, args=[], connector_id=connector,
                    input_files=["proj1/seed.txt"],
                )
            )
            final = manager.wait(h.job_id, timeout=10)
            assert final.status is JobStatus.FINISHED
            payloads = [
                (e.kind, e.payload)
                for e in manager.events(h.job_id)
                if e.kind in ("stdout", "stderr", "file_staged",
                              "file_retrieved")
            ]
            out = (ws / "proj1" / h.job_id / "result.txt").read_bytes()
            results[connector] = (payloads, out)
        assert results["local"] == results["sim-remote"]

    def test_sim_remote_stages_into_remote_root(self, manager, ws):
        (ws / "proj1" / "in.dat").write_text("z")
        h = manager.launch(
            echo_profile(connector_id="sim-remote",
                         input_files=["proj1/in.dat"])
        )
        manager.wait(h.job_id, timeout=10)
        assert (ws / ".remote" / h.job_id / "in.dat").is_file()

    def test_injected_transfer_failure(self, manager, ws):
        (ws / "proj1" / "in.dat").write_text("z")
        h = manager.launch(
            echo_profile(
                connector_id="sim-remote",
                input_files=["proj1/in.dat"],
                faults=FaultSpec(failure_probability=1.0, seed=1),
            )
        )
        final = manager.wait(h.job_id, timeout=10)
        assert final.status is JobStatus.FAILED
        diag = [e for e in manager.events(h.job_id) if e.kind == "stderr"]
        assert any("TransportFailure" in e.payload for e in diag)


class TestKill:
    def test_kill_sleeper_within_3s(self, manager, ws):
        rel = write_script(ws, "proj1/sleeper.py", SLEEPER)
        h = manager.launch(echo_profile(executable=rel, args=[]))
        deadline = time.time() + 10
        while manager.poll(h.job_id).status is not JobStatus.RUNNING:
            assert time.time() < deadline
            time.sleep(0.01)
        start = time.time()
        final = manager.kill(h.job_id)
        assert time.time() - start < 3.0
        assert final.status is JobStatus.CANCELLED

    def test_kill_finished_is_noop(self, manager):
        h = manager.launch(echo_profile())
        manager.wait(h.job_id, timeout=10)
        before = manager.events(h.job_id)
        after_handle = manager.kill(h.job_id)
        assert after_handle.status is JobStatus.FINISHED
        assert len(manager.events(h.job_id)) == len(before)

    def test_kill_during_staging_never_runs(self, manager, ws):
        (ws / "proj1" / "slow.dat").write_bytes(b"s" * 100)
        h = manager.launch(
            echo_profile(
                connector_id="sim-remote",
                input_files=["proj1/slow.dat"] ,
                faults=FaultSpec(latency_ms=700),
            )
        )
        deadline = time.time() + 5
        while manager.poll(h.job_id).status is not JobStatus.STAGING:
            assert time.time() < deadline
            time.sleep(0.005)
        final = manager.kill(h.job_id)
        assert final.status is JobStatus.CANCELLED
        kinds = [(e.kind, e.payload) for e in manager.events(h.job_id)]
        assert ("status", "Running") not in kinds


class TestEventStream:
    def test_replay_complete_and_gap_free(self, manager):
        h = manager.launch(echo_profile())
        manager.wait(h.job_id, timeout=10)
        events = list(manager.stream_events(h.job_id, 0, follow=True))
        assert [e.seq for e in events] == list(range(len(events)))
        statuses = [e for e in events if e.kind == "status"]
        assert statuses[-1].payload in ("Finished", "Failed", "Cancelled")
        assert events[-1] is statuses[-1]

    def test_past_end_read_is_empty(self, manager):
        h = manager.launch(echo_profile())
        manager.wait(h.job_id, timeout=10)
        last = manager.events(h.job_id)[-1].seq
        assert list(manager.stream_events(h.job_id, last + 1)) == []

    def test_two_subscribers_identical(self, manager, ws):
        rel = write_script(
            ws, "proj1/chatty.py",
            "for i in range(20): print(i, flush=True)\n",
        )
        h = manager.launch(echo_profile(executable=rel, args=[]))
        captured = [[], []]

        def subscribe(slot):
            for ev in manager.stream_events(h.job_id, 0, follow=True):
                captured[slot].append((ev.seq, ev.kind, ev.payload))

        threads = [threading.Thread(target=subscribe, args=(i,)) for i in (0, 1)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=15)
        assert captured[0] == captured[1]
        assert len(captured[0]) >= 20

    def test_events_log_file_matches_stream(self, manager, ws):
        import json

        h = manager.launch(echo_profile())
        manager.wait(h.job_id, timeout=10)
        disk = [
            json.loads(line)
            for line in (ws / "proj1" / h.job_id / "events.log")
            .read_text().splitlines()
        ]
        mem = [e.to_dict() for e in manager.events(h.job_id)]
        assert disk == mem

    def test_gap_free_over_randomized_jobs(self, manager, ws):
        """Random durations, output counts, and cancel injections: seq has no
        gaps and exactly one terminal status event, always last."""
        rng = random.Random(11)
        handles = []
        for i in range(12):
            duration = rng.choice([0, 0.05, 0.4])
            outputs = rng.randrange(3)
            body = (
                "import time\n"
                f"time.sleep({duration})\n"
                + "".join(
                    f"open('f{j}.txt','w').write('{j}')\n" for j in range(outputs)
                )
                + "print('done', flush=True)\n"
            )
            rel = write_script(ws, f"proj1/rand{i}.py", body)
            h = manager.launch(echo_profile(executable=rel, args=[]))
            handles.append(h)
            if rng.random() < 0.3:
                manager.kill(h.job_id)
        for h in handles:
            manager.wait(h.job_id, timeout=15)
        for h in handles:
            events = manager.events(h.job_id)
            assert [e.seq for e in events] == list(range(len(events)))
            terminal = [
                e for e in events
                if e.kind == "status"
                and e.payload in ("Finished", "Failed", "Cancelled")
            ]
            assert len(terminal) == 1
            assert events[-1] is terminal[0]
