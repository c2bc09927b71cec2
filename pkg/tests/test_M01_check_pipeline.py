import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.path.insert(0, str(Path(__file__).resolve().parent))

import pytest
from click.testing import CliRunner

from processes.P00_set_packages import *
from processes.P02_system_processes import ReplayDir
from processes.P04_static_lists import (
    EXIT_BUILD_FAILURE, EXIT_OK, EXIT_USAGE, ReportFormat,
)
from processes.P05_exceptions import StateLocked
from processes.P06_depgraph import load_meta
from processes.P12_detector import REPORT_HEADER
from main.M00_run_cli import depsentry
from main.M01_check_pipeline import (
    cmd_check, cmd_init, cmd_report, cmd_verify, load_state, load_stored_report, run_guarded,
)
from helpers import dry_run, machine_pairs, make_database, recipe_trace, record, replay_config, write_tree
from sim_make import PHONY, SimMake

MACHINE = ReportFormat.MACHINE


# ----------------------------------------------------------------------------------------------------
# fzy: one object, one link, a body-only commit
# ----------------------------------------------------------------------------------------------------
FZY_HEADERS = ["src/fzy.h", "src/match.h", "src/tty.h", "src/choices.h", "src/options.h"]
FZY_COMPILE = "cc -Isrc -c -o src/fzy.o src/fzy.c"
FZY_LINK = "cc -o fzy src/fzy.o"
FZY_C = "".join(f'#include "{Path(h).name}"\n' for h in FZY_HEADERS) + "\nint main(void) { return 1; }\n"
FZY_DIFF = """\
diff --git a/src/fzy.c b/src/fzy.c
index 1111111..2222222 100644
--- a/src/fzy.c
+++ b/src/fzy.c
@@ -7 +7 @@
-int main(void) { return 0; }
+int main(void) { return 1; }
"""
FZY_FINDINGS = {("MD", "src/fzy.o", "src/match.h"), ("MD", "src/fzy.o", "src/tty.h")}


def _fzy_trace(project, compile_reads):
    return recipe_trace(project, [
        (FZY_COMPILE, [f"{project}/{p}" for p in compile_reads], [f"{project}/src/fzy.o"]),
        (FZY_LINK, [f"{project}/src/fzy.o"], [f"{project}/fzy"]),
    ])


@pytest.fixture
def fzy(project, replay_dir):
    write_tree(project, {"src/fzy.c": FZY_C, "README": "fzy\n", **{h: "#pragma once\n" for h in FZY_HEADERS}})
    database = make_database([
        ("all", "fzy", []),
        ("fzy", "src/fzy.o", [FZY_LINK]),
        ("src/fzy.o", "src/fzy.c src/fzy.h src/choices.h src/options.h", [FZY_COMPILE]),
    ], phony=["all"])
    dry = dry_run([("src/fzy.o", [FZY_COMPILE]), ("fzy", [FZY_LINK])])
    record(replay_dir, "eb4cbd4", {
        ReplayDir.CLEAN_TRACE: _fzy_trace(project, ["src/fzy.c", *FZY_HEADERS]),
        ReplayDir.MAKE_DB: database,
        ReplayDir.MAKE_DRY_RUN: dry,
    })
    record(replay_dir, "f061893", {
        ReplayDir.COMMIT_DIFF: FZY_DIFF,
        ReplayDir.INCREMENTAL_TRACE: _fzy_trace(project, ["src/fzy.c", "src/fzy.h"]),
        ReplayDir.MAKE_DB: database,
        ReplayDir.MAKE_DRY_RUN: dry,
    })
    return replay_config(project, replay_dir)


def test_fzy_keeps_historical_deps_across_a_body_only_commit(fzy, echo):
    assert cmd_init(fzy, "eb4cbd4", fmt=MACHINE, echo=echo) == EXIT_OK
    assert machine_pairs(echo.text) == FZY_FINDINGS

    echo.clear()
    assert cmd_check(fzy, "f061893", fmt=MACHINE, echo=echo) == EXIT_OK
    assert machine_pairs(echo.text) == FZY_FINDINGS
    assert load_state(fzy)[0].deps_of("src/fzy.o") == {"src/fzy.c", *FZY_HEADERS}
    assert load_meta(fzy.store_dir)["root_commit"] == "f061893"

    checked = echo.text
    echo.clear()
    assert cmd_report(fzy, MACHINE, echo=echo) == EXIT_OK
    assert echo.text == checked


def test_second_init_needs_force(fzy, echo):
    assert cmd_init(fzy, "eb4cbd4", echo=echo) == EXIT_OK
    assert cmd_init(fzy, "eb4cbd4", echo=echo) == EXIT_USAGE
    assert cmd_init(fzy, "eb4cbd4", force=True, echo=echo) == EXIT_OK


def test_check_before_init(fzy, echo):
    assert run_guarded(cmd_check, fzy, "f061893", echo=echo) == EXIT_USAGE
    assert echo.text == ""


def test_concurrent_run_is_refused(fzy, echo):
    cmd_init(fzy, "eb4cbd4", echo=echo)
    with FileLock(str(fzy.store.lock)):
        with pytest.raises(StateLocked):
            cmd_check(fzy, "f061893", echo=echo)
        assert run_guarded(cmd_check, fzy, "f061893", echo=echo) == EXIT_USAGE
    assert load_meta(fzy.store_dir)["root_commit"] == "eb4cbd4"


def _failing(project):
    return recipe_trace(project, []).replace("E\t0", "E\t2")


def test_failed_build_leaves_the_store_at_the_parent(fzy, project, replay_dir, echo):
    cmd_init(fzy, "eb4cbd4", echo=echo)
    record(replay_dir, "f061893", {ReplayDir.INCREMENTAL_TRACE: _failing(project)})
    assert run_guarded(cmd_check, fzy, "f061893", echo=echo) == EXIT_BUILD_FAILURE
    assert load_meta(fzy.store_dir)["root_commit"] == "eb4cbd4"


def test_interrupted_save_keeps_the_parent_state(fzy, echo, monkeypatch):
    cmd_init(fzy, "eb4cbd4", echo=echo)

    def interrupted(*args, **kwargs):
        raise KeyboardInterrupt

    with monkeypatch.context() as patched:
        patched.setattr("main.M01_check_pipeline.save_meta", interrupted)
        with pytest.raises(KeyboardInterrupt):
            cmd_check(fzy, "f061893", echo=echo)

    graph, recipes, meta = load_state(fzy)
    assert meta["root_commit"] == graph.root_commit == recipes.commit == "eb4cbd4"
    assert load_stored_report(fzy).commit == "eb4cbd4"

    echo.clear()
    assert cmd_check(fzy, "f061893", fmt=MACHINE, echo=echo) == EXIT_OK
    assert machine_pairs(echo.text) == FZY_FINDINGS
    assert len(list(fzy.store.root.glob("snapshot-*"))) == 1


def test_failed_first_build_writes_no_state(fzy, project, replay_dir, echo):
    record(replay_dir, "eb4cbd4", {ReplayDir.CLEAN_TRACE: _failing(project)})
    assert run_guarded(cmd_init, fzy, "eb4cbd4", echo=echo) == EXIT_BUILD_FAILURE
    assert not fzy.store.meta.exists()


def test_irrelevant_commit_is_skipped(fzy, project, replay_dir, echo):
    record(replay_dir, "a1b2c3d", {ReplayDir.COMMIT_DIFF: "--- a/README\n+++ b/README\n@@ -1 +1 @@\n-fzy\n+fzy!\n"})
    config = replay_config(project, replay_dir, skip_irrelevant=True)
    cmd_init(config, "eb4cbd4", echo=echo)
    echo.clear()
    assert cmd_check(config, "a1b2c3d", fmt=MACHINE, echo=echo) == EXIT_OK
    assert machine_pairs(echo.text) == FZY_FINDINGS
    assert load_meta(config.store_dir)["root_commit"] == "a1b2c3d"


def test_verify_without_a_report_file(fzy, tmp_path, echo):
    assert cmd_verify(fzy, tmp_path / "none.txt", echo=echo) == EXIT_USAGE


def test_verify_needs_a_stored_graph(fzy, tmp_path, echo):
    report = tmp_path / "report.txt"
    report.write_text(f"{REPORT_HEADER}\nMD\tsrc/fzy.o\tsrc/tty.h\tTrace\teb4cbd4\n# 1 findings\n", encoding="utf-8")
    assert run_guarded(cmd_verify, fzy, report, echo=echo) == EXIT_USAGE
    assert echo.text == ""


def test_cli_init_check_report(fzy, project, replay_dir):
    runner = CliRunner()
    common = ["--project", str(project), "--replay", str(replay_dir), "--format", "machine"]
    result = runner.invoke(depsentry, ["init", *common, "--commit", "eb4cbd4"])
    assert result.exit_code == EXIT_OK
    assert "MD\tsrc/fzy.o\tsrc/match.h\tTrace\teb4cbd4" in result.output

    result = runner.invoke(depsentry, ["check", *common, "--commit", "f061893"])
    assert result.exit_code == EXIT_OK
    assert "MD\tsrc/fzy.o\tsrc/tty.h\tTrace\tf061893" in result.output

    result = runner.invoke(depsentry, ["report", "--project", str(project), "--format", "machine"])
    assert result.exit_code == EXIT_OK and "# 2 findings" in result.output


# ----------------------------------------------------------------------------------------------------
# Generated projects: the merged graph tracks a fresh clean build commit by commit
# ----------------------------------------------------------------------------------------------------
def _expected_pairs(sim: SimMake, clean_graph) -> set:
    pairs = set()
    for target, rule in sim.rules.items():
        if rule.phony:
            continue
        actual, declared = clean_graph.deps_of(target), set(rule.prereqs)
        pairs |= {("MD", target, dep) for dep in actual - declared}
        pairs |= {("RD", target, dep) for dep in declared - actual}
    return pairs


@pytest.mark.parametrize("seed", range(5))
def test_merged_graph_matches_a_clean_build_after_every_commit(project, replay_dir, echo, seed):
    sim = SimMake.generate(project, replay_dir, seed)
    rng = random.Random(1000 + seed)
    initial = sim.init("c00")
    config = replay_config(project, replay_dir)
    assert cmd_init(config, "c00", fmt=MACHINE, echo=echo) == EXIT_OK
    assert load_state(config)[0].edge_map() == initial.edge_map()
    assert machine_pairs(echo.text) == _expected_pairs(sim, initial)

    for n in range(1, 11):
        commit = f"c{n:02d}"
        recorded = sim.commit(commit, sim.random_mutation(rng))
        echo.clear()
        assert cmd_check(config, commit, fmt=MACHINE, echo=echo) == EXIT_OK, recorded.operations
        assert load_state(config)[0].edge_map() == recorded.clean_graph.edge_map(), recorded.operations
        pairs = machine_pairs(echo.text)
        assert pairs == _expected_pairs(sim, recorded.clean_graph), recorded.operations
        assert not {target for _, target, _ in pairs} & set(PHONY)


@pytest.mark.parametrize("seed", [3, 8])
def test_headers_declared_by_no_rule_are_all_missing(project, replay_dir, echo, seed):
    sim = SimMake.generate(project, replay_dir, seed, declare_headers=False, rd_rate=0)
    sim.init("c00")
    cmd_init(replay_config(project, replay_dir), "c00", fmt=MACHINE, echo=echo)

    manifest = sim.include_manifest()
    assert machine_pairs(echo.text) == {("MD", obj, h) for obj, headers in manifest.items() for h in headers}
    for header in sorted(set().union(*manifest.values())):
        assert sim.touch(header) == []


# ----------------------------------------------------------------------------------------------------
# Soft-link version bump
# ----------------------------------------------------------------------------------------------------
def _libz(version, link):
    library = f"libz.so.1.2.{version}"
    build = f"rm -f libz.so.1.2.* && cc -shared -o {library} z.c"
    link_command = f"{link} {library} libz.so"
    database = make_database([("all", "libz.so", []), ("libz.so", library, [link_command]),
                              (library, "z.c", [build])], phony=["all"])
    return library, build, link_command, database, dry_run([(library, [build]), ("libz.so", [link_command])])


@pytest.mark.parametrize("link, golden", [
    ("ln -s", "MD\tlibz.so\tlibz.so.1.2.11\tHistorical\tv12\nRD\tlibz.so\tlibz.so.1.2.12\tHistorical\tv12\n"
              "# 2 findings\n"),
    ("ln -sf", "# 0 findings\n"),
])
def test_version_bump_of_a_soft_link(project, replay_dir, echo, link, golden):
    write_tree(project, {"z.c": "int z;\n", "libz.so.1.2.11": "", "libz.so.1.2.12": "", "libz.so": ""})
    old, old_build, old_link, old_db, old_dry = _libz(11, link)
    record(replay_dir, "v11", {
        ReplayDir.CLEAN_TRACE: recipe_trace(project, [
            (old_build, [f"{project}/z.c"], [f"{project}/{old}"]),
            (old_link, [f"{project}/{old}"], [f"{project}/libz.so"]),
        ]),
        ReplayDir.MAKE_DB: old_db,
        ReplayDir.MAKE_DRY_RUN: old_dry,
    })

    new, new_build, new_link, new_db, new_dry = _libz(12, link)
    if link == "ln -sf":
        link_run = (new_link, [f"{project}/{new}"], [f"{project}/libz.so"], [f"{project}/libz.so"])
    else:
        link_run = (new_link, [], [])       # the link exists, ln fails and make carries on
    bump = recipe_trace(project, [(new_build, [f"{project}/z.c"], [f"{project}/{new}"], [f"{project}/{old}"]),
                                  link_run])
    record(replay_dir, "v12", {
        ReplayDir.COMMIT_DIFF: "--- a/Makefile\n+++ b/Makefile\n@@ -1 +1 @@\n-VERSION = 1.2.11\n+VERSION = 1.2.12\n",
        ReplayDir.INCREMENTAL_TRACE: bump,
        f"targets/{ReplayDir.target_file_name('libz.so')}": bump,
        ReplayDir.MAKE_DB: new_db,
        ReplayDir.MAKE_DRY_RUN: new_dry,
    })

    config = replay_config(project, replay_dir)
    assert cmd_init(config, "v11", echo=echo) == EXIT_OK
    (project / old).unlink()
    echo.clear()
    assert cmd_check(config, "v12", fmt=MACHINE, echo=echo) == EXIT_OK
    assert echo.text.split("\n", 1)[1] == golden

    warnings = load_stored_report(config).warnings
    assert any("libz.so" in w and "ln -s" in w for w in warnings) == (link == "ln -s")
