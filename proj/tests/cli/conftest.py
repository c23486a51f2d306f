import json
import os
import subprocess
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def npb_bin():
    path = os.environ.get("NPB_CLI")
    if not path:
        guess = Path(__file__).resolve().parents[2] / "build" / "tools" / "npb"
        path = str(guess)
    if not Path(path).exists():
        pytest.skip("npb binary not built (set NPB_CLI)")
    return path


@pytest.fixture
def run(npb_bin):
    def _run(*args, check=True):
        proc = subprocess.run([npb_bin, *map(str, args)], capture_output=True, text=True)
        if check and proc.returncode != 0:
            raise AssertionError(f"npb {' '.join(map(str, args))} -> {proc.returncode}\n{proc.stderr}")
        return proc

    return _run


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj))
    return path
