# ====================================================================================================
# helpers.py
# ----------------------------------------------------------------------------------------------------
# Small builders shared by the test modules (trees, hand-written traces, replay configs).
# ====================================================================================================

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.dont_write_bytecode = True

import pytest

from processes.P00_set_packages import *
from processes.P04_static_lists import TraceOp
from processes.P07_module_configs import VcsMode, load_config
from processes.P09_tracer import BuildTrace, TraceEvent, dump_trace

needs_make = pytest.mark.skipif(shutil.which("make") is None, reason="GNU make not on PATH")


def write_tree(root: Path, files: Mapping[str, str]) -> None:
    for name, text in files.items():
        path = Path(root) / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def replay_config(project_root, replay, **overrides):
    values = {"replay_dir": str(replay), "vcs_mode": VcsMode.PRE_APPLIED}
    values.update(overrides)
    return load_config(project_root, values)


def machine_pairs(text: str) -> set:
    """{(kind, target, dependency)} of a machine-format report."""
    return {tuple(line.split("\t")[:3]) for line in text.splitlines() if line and not line.startswith("#")}


def recipe_trace(root, recipes: Sequence[tuple], make_command: str = "make -B") -> str:
    """
    Trace text of a make run under `root`.

    Each recipe is (command, reads, outputs) or (command, reads, outputs, deletes); every recipe
    runs in its own child process of the make root (pid 1).
    """
    events = []
    seq = itertools.count(1)
    events.append(TraceEvent(next(seq), 1, 0, TraceOp.EXEC, make_command))
    for index, recipe in enumerate(recipes):
        command, reads, outputs = recipe[:3]
        deletes = recipe[3] if len(recipe) > 3 else ()
        pid = 100 + index
        events.append(TraceEvent(next(seq), pid, 1, TraceOp.SPAWN))
        events.append(TraceEvent(next(seq), pid, 1, TraceOp.EXEC, command))
        events.extend(TraceEvent(next(seq), pid, 1, TraceOp.DELETE, p) for p in deletes)
        events.extend(TraceEvent(next(seq), pid, 1, TraceOp.READ, p) for p in reads)
        events.extend(TraceEvent(next(seq), pid, 1, TraceOp.CREATE, p) for p in outputs)
        events.append(TraceEvent(next(seq), pid, 1, TraceOp.EXIT, "0"))
    events.append(TraceEvent(next(seq), 1, 0, TraceOp.EXIT, "0"))
    return dump_trace(BuildTrace(tuple(events), str(root)))


def make_database(rules: Sequence[tuple], phony: Sequence[str] = ()) -> str:
    """
    Minimal `make -pn` text. Each rule is (target, prerequisites, recipe lines); a prerequisite
    string may contain "|" for order-only prerequisites.
    """
    lines = ["# GNU Make 4.3", "", "# Make data base, printed on Thu Jan  1 00:00:00 2026", "",
             "# Variables", "", "CC = cc", "", "# Files", ""]
    for target, prereqs, recipe in rules:
        lines.append(f"{target}: {prereqs}".rstrip())
        if target in phony:
            lines.append("#  Phony target (prerequisite of .PHONY).")
        lines.append("#  Implicit rule search has not been done.")
        if recipe:
            lines.append("#  recipe to execute (from 'Makefile', line 1):")
            lines.extend(f"\t{line}" for line in recipe)
        lines.append("")
    if phony:
        lines += [f".PHONY: {' '.join(phony)}", ""]
    lines += ["# VPATH Search Paths", "", "# No 'vpath' search paths.", ""]
    return "\n".join(lines)


def dry_run(recipes: Sequence[tuple]) -> str:
    """`make -n -B --debug=basic` text; each entry is (target, recipe lines)."""
    lines = ["GNU Make 4.3", "Built for x86_64-pc-linux-gnu", "Reading makefiles...", "Updating goal targets...."]
    for target, recipe in recipes:
        lines.append(f"   Must remake target '{target}'.")
        lines.extend(recipe)
        lines.append(f"   Successfully remade target file '{target}'.")
    return "\n".join(lines) + "\n"


def record(replay: Path, commit: str, files: Mapping[str, str]) -> None:
    write_tree(Path(replay) / commit, files)
