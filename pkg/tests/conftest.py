import shutil
import stat
import sys
import tempfile
from pathlib import Path

import pytest

from forgeflow import Engine


@pytest.fixture
def ws(tmp_path):
    return tmp_path / "workspace"


@pytest.fixture
def engine(ws):
    return Engine(ws)


def write_script(ws: Path, rel: str, body: str) -> str:
    """Drop an executable python script into the workspace; returns rel path."""
    path = ws / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"#!{sys.executable}\n{body}", encoding="utf-8")
    path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return rel


SLEEPER = """\
import time
for i in range(300):
    print(f"tick {i}", flush=True)
    time.sleep(0.1)
"""

CSV_COPIER = """\
import shutil, sys
shutil.copy(sys.argv[1], "out.csv")
print("copied", flush=True)
"""
