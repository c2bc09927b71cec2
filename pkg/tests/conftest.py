# ====================================================================================================
# conftest.py
# ----------------------------------------------------------------------------------------------------
# Shared pytest fixtures: import path, a clean DEPSENTRY_* environment, project and replay
# directories, and a collector that stands in for click.echo.
# ====================================================================================================

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.path.insert(0, str(Path(__file__).resolve().parent))
sys.dont_write_bytecode = True

import pytest

from processes.P00_set_packages import *


class Echo:
    """Collects what a command would print (same call shape as click.echo)."""

    def __init__(self):
        self.chunks = []

    def __call__(self, message: str = "", nl: bool = True) -> None:
        self.chunks.append(message + ("\n" if nl else ""))

    @property
    def text(self) -> str:
        return "".join(self.chunks)

    def clear(self) -> None:
        self.chunks.clear()


@pytest.fixture
def echo() -> Echo:
    return Echo()


@pytest.fixture(autouse=True)
def _isolated_environment(monkeypatch):
    monkeypatch.delenv("DEPSENTRY_STORE", raising=False)
    monkeypatch.delenv("DEPSENTRY_REPLAY", raising=False)


@pytest.fixture
def project(tmp_path) -> Path:
    root = tmp_path / "project"
    root.mkdir()
    return root.resolve()


@pytest.fixture
def replay_dir(tmp_path) -> Path:
    path = tmp_path / "replay"
    path.mkdir()
    return path.resolve()

