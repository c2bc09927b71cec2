# ====================================================================================================
# M01_check_pipeline.py
# ----------------------------------------------------------------------------------------------------
# Runs the dependency checker end to end for one project.
# ----------------------------------------------------------------------------------------------------
# Process Summary:
#   init   → traced clean build → Actual graph + recipe snapshot saved → detection once
#   check  → ① diff of the commit (git / --diff / replay)
#            ② traced incremental build
#            ③ #include and file-change analysis
#            ④ recipe diff → forced single-target rebuilds of targets the build skipped
#            ⑤ merge with the stored graph
#            ⑥ detection against the declared graph, state advanced to the commit
#   report → re-render the stored findings
#   verify → confirm findings of a machine report with make experiments
# ----------------------------------------------------------------------------------------------------
# State:
#   actual-graph.v1, recipes.v1 and report.v1 go into a fresh <store>/snapshot-*/ directory;
#   meta.v1 is replaced last and names it. A failed build or trace raises before any write, and an
#   interrupted save leaves meta.v1 on the parent commit's snapshot.
#   One pipeline at a time per store (FileLock on <store>/depsentry.lock).
# ====================================================================================================

import sys
from pathlib import Path

# ----------------------------------------------------------------------------------------------------
# SYSTEM PATH ADJUSTMENT
# ----------------------------------------------------------------------------------------------------
# Ensures Python can import shared modules from the parent folder (`processes/` directory).
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.dont_write_bytecode = True  # Prevents creation of __pycache__ folders

# ----------------------------------------------------------------------------------------------------
# PROJECT IMPORTS
# ----------------------------------------------------------------------------------------------------
from processes.P00_set_packages import *
from processes.P02_system_processes import run_command
from processes.P04_static_lists import (
    BuildKind, EXIT_BUILD_FAILURE, EXIT_OK, EXIT_REJECTED, EXIT_USAGE, ReportFormat,
)
from processes.P05_exceptions import (
    BuildFailed, ConfigError, DepsentryError, ProbeFailed, StateCorrupt, StateLocked, StateMissing,
    TargetBuildFailed, TracerUnavailable,
)
from processes.P01_set_file_paths import SNAPSHOT_PREFIX, store_paths
from processes.P06_depgraph import exclude_paths, load, load_meta, save, save_meta, snapshot_dir
from processes.P07_module_configs import Config, VcsMode
from processes.P08_make_adapter import (
    declared_graph, diff_recipes, dump_database, dump_dry_run, lint_soft_links, load_recipes,
    missing_from_dry_run, phony_targets, save_recipes, snapshot_recipes,
)
from processes.P09_tracer import (
    LiveStraceProvider, ReplayProvider, build_actual_graph, multi_output_recipes, run_traced_build,
)
from processes.P10_change_analyzer import extract_directive_changes, is_build_relevant, parse_diff
from processes.P11_inference import (
    InferenceInputs, ResolverContext, execute_rebuilds, infer_file_updates, merge, plan_rebuilds,
)
from processes.P12_detector import ErrorReport, detect, load_report, parse_machine_report, render, save_report
from processes.P13_oracle import verify_findings

logger = logging.getLogger(__name__)

WORKTREE_COMMIT = "worktree"

# Declared targets listed per "not remade by the dry run" warning.
MISSING_TARGETS_SHOWN = 10


# ----------------------------------------------------------------------------------------------------
# HELPERS
# ----------------------------------------------------------------------------------------------------
@contextlib.contextmanager
def store_lock(config: Config):
    """Hold the store's advisory lock; a second concurrent pipeline gets StateLocked."""
    paths = config.store
    paths.root.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(paths.lock), timeout=0)
    try:
        lock.acquire()
    except Timeout as exc:
        raise StateLocked(f"another depsentry run holds {paths.lock}") from exc
    try:
        yield paths
    finally:
        lock.release()


def _git(config: Config, *args: str) -> str:
    result = run_command(["git", *args], cwd=config.project_root)
    if not result.ok:
        raise ConfigError(f"git {' '.join(args)} failed: {result.stderr_tail(3)}")
    return result.stdout


def resolve_commit(config: Config, commit: Optional[str]) -> str:
    """The explicit commit, else HEAD in git mode, else a fixed working-tree label."""
    if commit:
        return commit
    if config.vcs_mode is VcsMode.GIT_COMMIT:
        return _git(config, "rev-parse", "HEAD").strip()
    return WORKTREE_COMMIT


def _provider(config: Config, commit: str):
    if config.replay is not None:
        return ReplayProvider(config.replay, commit)
    return LiveStraceProvider(config.project_root, config.make_args)


def _declared_side(config: Config, commit: str, stats: Counter) -> tuple:
    """(Declared graph, phony targets, recipe snapshot) of the tree as it is now."""
    root = str(config.project_root)
    database = dump_database(root, config.make_args, config.replay, commit)
    declared, rules = declared_graph(database, root, stats)
    dry_run = dump_dry_run(root, config.make_args, config.replay, commit)
    snapshot = snapshot_recipes(dry_run, commit, root)
    return declared.with_root_commit(commit), phony_targets(rules, root), snapshot


def _finish_report(config: Config, actual, declared, snapshot, commit: str,
                   warnings: list, stats: Counter) -> ErrorReport:
    actual = exclude_paths(actual, config.exclude_globs)
    declared = exclude_paths(declared, config.exclude_globs)
    report = detect(actual, declared, commit)
    report.warnings[:0] = warnings
    report.warnings.extend(lint_soft_links(snapshot, report.finding_targets))

    not_remade = missing_from_dry_run(declared, snapshot)
    if not_remade:
        shown = ", ".join(not_remade[:MISSING_TARGETS_SHOWN])
        more = f" (+{len(not_remade) - MISSING_TARGETS_SHOWN} more)" if len(not_remade) > MISSING_TARGETS_SHOWN else ""
        report.warnings.append(f"{len(not_remade)} declared targets not remade by the forced dry run: {shown}{more}")
    report.stats.update(stats)
    report.stats["warnings"] = len(report.warnings)
    return report


def _multi_output_warnings(trace) -> list:
    return [f"one recipe produced several files: {', '.join(outputs)}" for outputs in multi_output_recipes(trace)]


def load_state(config: Config) -> tuple:
    """
    (graph, recipes, meta) of the store.

    Raises:
        StateMissing: The store was never initialized.
        StateCorrupt: A file is unreadable, or the graph/recipes were written for another commit.
    """
    meta = load_meta(config.store_dir)
    state = snapshot_dir(config.store_dir, meta)
    graph = load(state)
    recipes = load_recipes(state)
    if graph.root_commit != meta["root_commit"] or recipes.commit != meta["root_commit"]:
        raise StateCorrupt(f"store {config.store_dir} mixes commits "
                           f"(meta {meta['root_commit']}, graph {graph.root_commit}, recipes {recipes.commit})")
    return graph, recipes, meta


def load_stored_report(config: Config, meta: Optional[dict] = None) -> ErrorReport:
    """The report saved with the current state."""
    meta = meta if meta is not None else load_meta(config.store_dir)
    return load_report(store_paths(snapshot_dir(config.store_dir, meta)).report)


def save_state(config: Config, graph, snapshot, report: ErrorReport, commit: str) -> None:
    """
    Write graph, recipes and report into a new snapshot directory, then point meta.v1 at it.

    Until the meta.v1 rename the store still loads as the previous state. Snapshot directories
    other than the new one are removed afterwards.
    """
    paths = config.store
    paths.root.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=SNAPSHOT_PREFIX, dir=paths.root))
    save(graph.with_root_commit(commit), staging)
    save_recipes(replace(snapshot, commit=commit), staging)
    save_report(report, store_paths(staging).report)
    save_meta(paths.root, config.project_root, commit, snapshot=staging.name)

    for old in paths.root.glob(f"{SNAPSHOT_PREFIX}*"):
        if old != staging:
            shutil.rmtree(old, ignore_errors=True)
            logger.debug("🧹 removed %s", old)
    logger.info("💾 State saved at %s (commit %s)", staging, commit)


# ----------------------------------------------------------------------------------------------------
# cmd_init()
# ----------------------------------------------------------------------------------------------------
def cmd_init(config: Config, commit: Optional[str] = None, force: bool = False,
             fmt: ReportFormat = ReportFormat.HUMAN, echo=click.echo) -> int:
    """
    Bootstrap the store from a traced clean build and report once.

    Returns:
        int: EXIT_OK (findings included), EXIT_USAGE when the store exists without `force`.

    Raises:
        BuildFailed, TracerUnavailable, ParseError: Propagated to the caller (see exit_code_for).
    """
    if config.store.meta.exists() and not force:
        logger.error("❌ %s is already initialized; use --force to start over", config.store_dir)
        return EXIT_USAGE

    with store_lock(config):
        commit = resolve_commit(config, commit)
        warnings, stats = [], Counter()
        logger.info("⏳ Initializing %s at %s", config.project_root, commit)

        trace = run_traced_build(config.project_root, config.make_args, BuildKind.CLEAN,
                                 provider=_provider(config, commit), store=config.store_dir, commit=commit)
        actual = build_actual_graph(trace, commit, warnings).with_root_commit(commit)
        warnings.extend(_multi_output_warnings(trace))

        declared, _, snapshot = _declared_side(config, commit, stats)
        report = _finish_report(config, actual, declared, snapshot, commit, warnings, stats)
        save_state(config, actual, snapshot, report, commit)

    echo(render(report, fmt), nl=False)
    return EXIT_OK


# ----------------------------------------------------------------------------------------------------
# cmd_check()
# ----------------------------------------------------------------------------------------------------
def _commit_diff(config: Config, parent: str, commit: str, diff_text: Optional[str]) -> str:
    if diff_text is not None:
        return diff_text
    if config.vcs_mode is VcsMode.GIT_COMMIT:
        text = _git(config, "diff", "-M", "--relative", parent, commit)
        _git(config, "checkout", "-q", commit)
        return text
    if config.replay is not None:
        return config.replay.read_text(commit, config.replay.COMMIT_DIFF) or ""
    return ""


def cmd_check(config: Config, commit: Optional[str] = None, diff_text: Optional[str] = None,
              fmt: ReportFormat = ReportFormat.HUMAN, echo=click.echo) -> int:
    """
    Analyse one commit on top of the stored state.

    Steps:
        1. Loads the state of the parent commit and obtains the commit's diff.
        2. With skip_irrelevant, a diff without Source/Header/Makefile changes only advances the
           stored commit and re-emits the previous findings.
        3. Runs the traced incremental build (always, even for commits without build changes).
        4. Extracts #include changes, dumps the declared graph and the recipes, diffs the recipes.
        5. Infers file-change updates, plans and runs single-target rebuilds.
        6. Merges everything into the new Actual graph, detects, saves, prints.

    Returns:
        int: EXIT_OK.
    """
    with store_lock(config):
        historical, old_recipes, meta = load_state(config)
        parent = meta["root_commit"]
        commit = resolve_commit(config, commit)
        if config.vcs_mode is VcsMode.GIT_COMMIT and commit == WORKTREE_COMMIT:
            raise ConfigError("git mode needs a commit")
        logger.info("⏳ Checking %s (parent %s)", commit, parent)

        root = str(config.project_root)
        delta = parse_diff(_commit_diff(config, parent, commit, diff_text), root, commit,
                           config.source_suffixes, config.header_suffixes)

        if config.skip_irrelevant and not is_build_relevant(delta, config.source_suffixes, config.header_suffixes):
            logger.info("✅ No build-relevant change in %s; re-emitting previous findings", commit)
            report = load_stored_report(config, meta)
            save_state(config, historical, old_recipes, report, commit)
            echo(render(report, fmt), nl=False)
            return EXIT_OK

        warnings, stats = [], Counter()
        provider = _provider(config, commit)

        trace = run_traced_build(root, config.make_args, BuildKind.INCREMENTAL,
                                 provider=provider, store=config.store_dir, commit=commit)
        incremental = build_actual_graph(trace, commit, warnings)
        warnings.extend(_multi_output_warnings(trace))

        directive_changes = extract_directive_changes(delta, config.source_suffixes, config.header_suffixes)
        declared, phony, snapshot = _declared_side(config, commit, stats)
        recipe_diff = diff_recipes(old_recipes, snapshot)
        stats["directive_changes"] = len(directive_changes)
        stats["recipe_changes"] = len(recipe_diff)

        context = ResolverContext(root, snapshot, declared, config.source_suffixes, config.header_suffixes,
                                  config.compiler, warnings)
        file_updates = infer_file_updates(historical, delta, context)
        plan = plan_rebuilds(recipe_diff, incremental, file_updates.uncovered, snapshot.targets, phony)
        rebuild_graph, failures = execute_rebuilds(plan, root, config.make_args, provider=provider,
                                                   store=config.store_dir, commit=commit)
        stats["rebuilds"] = len(plan.targets)
        stats["failed_rebuilds"] = len(failures)
        warnings.extend(str(failure) for failure in failures)

        inputs = InferenceInputs(historical, incremental, directive_changes, delta, recipe_diff, context, file_updates)
        merged = merge(inputs, rebuild_graph, warnings)
        stats["unresolved_includes"] = sum("unresolved" in w for w in warnings)

        report = _finish_report(config, merged, declared, snapshot, commit, warnings, stats)
        save_state(config, merged, snapshot, report, commit)

    echo(render(report, fmt), nl=False)
    return EXIT_OK


# ----------------------------------------------------------------------------------------------------
# cmd_report() / cmd_verify()
# ----------------------------------------------------------------------------------------------------
def cmd_report(config: Config, fmt: ReportFormat = ReportFormat.HUMAN, echo=click.echo) -> int:
    echo(render(load_stored_report(config), fmt), nl=False)
    return EXIT_OK


def cmd_verify(config: Config, report_path, echo=click.echo) -> int:
    """
    Probe every finding of a machine-format report; one Verdict line per finding.

    Returns:
        int: EXIT_OK when every finding is confirmed, EXIT_REJECTED otherwise,
             EXIT_USAGE when the report file is missing or the store holds no graph.
    """
    report_path = Path(report_path)
    if not report_path.is_file():
        logger.error("❌ report file %s not found", report_path)
        return EXIT_USAGE
    findings = parse_machine_report(report_path.read_text(encoding="utf-8"))

    try:
        generated = load_state(config)[0].targets
    except (StateMissing, StateCorrupt) as exc:
        logger.error("❌ %s; run `depsentry init` first so generated files are known", exc)
        return EXIT_USAGE

    verdicts = verify_findings(findings, config.project_root, config.make_args, sorted(generated))
    for verdict in verdicts:
        echo(verdict.line())
    confirmed = sum(v.confirmed for v in verdicts)
    logger.info("✅ %d of %d findings confirmed", confirmed, len(verdicts))
    return EXIT_OK if confirmed == len(verdicts) else EXIT_REJECTED


# ----------------------------------------------------------------------------------------------------
# exit_code_for() / run_guarded()
# ----------------------------------------------------------------------------------------------------
def exit_code_for(exc: DepsentryError) -> int:
    """2 for build and trace failures, 3 for everything else (usage, state, input errors)."""
    if isinstance(exc, (BuildFailed, TargetBuildFailed, TracerUnavailable, ProbeFailed)):
        return EXIT_BUILD_FAILURE
    return EXIT_USAGE


def run_guarded(command, *args, **kwargs) -> int:
    """Run a cmd_* function, turning checker errors into exit codes."""
    try:
        return command(*args, **kwargs)
    except StateMissing as exc:
        logger.error("❌ %s (run `depsentry init` first)", exc)
        return EXIT_USAGE
    except BuildFailed as exc:
        logger.error("❌ %s; store left unchanged", exc)
        if exc.stderr_tail:
            logger.error("%s", exc.stderr_tail)
        return EXIT_BUILD_FAILURE
    except DepsentryError as exc:
        logger.error("❌ %s", exc)
        return exit_code_for(exc)


# ----------------------------------------------------------------------------------------------------
# STANDALONE EXECUTION
# ----------------------------------------------------------------------------------------------------
if __name__ == "__main__":
    from processes.P07_module_configs import load_config

    sys.exit(run_guarded(cmd_check, load_config(Path.cwd())))
