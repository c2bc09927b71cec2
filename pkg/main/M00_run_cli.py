# ====================================================================================================
# M00_run_cli.py
# ----------------------------------------------------------------------------------------------------
# Command-line entry point: `depsentry init | check | report | verify`.
# ----------------------------------------------------------------------------------------------------
# Exit codes:
#   0 → ran (with or without findings)
#   1 → verify rejected at least one finding
#   2 → build or trace failure
#   3 → usage or state error
# ----------------------------------------------------------------------------------------------------
# Examples:
#   python main/M00_run_cli.py init --project ~/src/fzy
#   python main/M00_run_cli.py check --project ~/src/fzy --commit f061893
#   python main/M00_run_cli.py check --project . --diff changes.diff --format machine > report.txt
#   python main/M00_run_cli.py verify --project . --report report.txt
# ====================================================================================================

import sys
from pathlib import Path

# ----------------------------------------------------------------------------------------------------
# SYSTEM PATH ADJUSTMENT
# ----------------------------------------------------------------------------------------------------
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.dont_write_bytecode = True  # Prevents creation of __pycache__ folders

# ----------------------------------------------------------------------------------------------------
# PROJECT IMPORTS
# ----------------------------------------------------------------------------------------------------
from processes.P00_set_packages import *
from processes.P04_static_lists import EXIT_USAGE, ReportFormat
from processes.P05_exceptions import ConfigError
from processes.P07_module_configs import VcsMode, load_config
from main.M01_check_pipeline import cmd_check, cmd_init, cmd_report, cmd_verify, run_guarded

logger = logging.getLogger(__name__)

_project_option = click.option("--project", "project", type=click.Path(exists=True, file_okay=False, path_type=Path),
                               default=".", show_default=True, help="Project root (where the Makefile is).")
_store_option = click.option("--store", "store", type=click.Path(path_type=Path), default=None,
                             help="State directory (default: $DEPSENTRY_STORE or <project>/.depsentry).")
_replay_option = click.option("--replay", "replay", type=click.Path(exists=True, file_okay=False, path_type=Path),
                              default=None, help="Read recorded traces and make output instead of running make.")
_make_arg_option = click.option("--make-arg", "make_args", multiple=True,
                                help="Extra argument passed to every make invocation (repeatable).")
_format_option = click.option("--format", "fmt", type=click.Choice([f.value for f in ReportFormat]),
                              default=ReportFormat.HUMAN.value, show_default=True)


def _config(project: Path, store: Optional[Path], replay: Optional[Path], make_args: tuple,
            vcs_mode: Optional[VcsMode] = None, skip_irrelevant: Optional[bool] = None):
    overrides = {
        "store_dir": str(store.absolute()) if store else None,
        "replay_dir": str(replay.absolute()) if replay else None,
        "make_args": tuple(make_args) or None,
        "vcs_mode": vcs_mode,
        "skip_irrelevant": skip_irrelevant or None,
    }
    return load_config(project, overrides)


def _vcs_mode(project: Path, commit: Optional[str], diff: Optional[str], replay: Optional[Path]) -> VcsMode:
    if diff is not None:
        return VcsMode.DIFF_FILE
    if commit and replay is None and (project / ".git").exists():
        return VcsMode.GIT_COMMIT
    return VcsMode.PRE_APPLIED


# ----------------------------------------------------------------------------------------------------
# COMMAND GROUP
# ----------------------------------------------------------------------------------------------------
@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--verbose", "-v", is_flag=True, help="Debug logging.")
@click.option("--quiet", "-q", is_flag=True, help="Warnings and errors only.")
def depsentry(verbose: bool, quiet: bool) -> None:
    """Detect missing and redundant Makefile dependencies commit by commit."""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif quiet:
        logging.getLogger().setLevel(logging.WARNING)


@depsentry.command()
@_project_option
@_store_option
@_replay_option
@_make_arg_option
@_format_option
@click.option("--commit", default=None, help="Identifier of the checked-out commit.")
@click.option("--force", is_flag=True, help="Re-initialize an existing store.")
def init(project, store, replay, make_args, fmt, commit, force):
    """Traced clean build: store the actual graph and report once."""
    try:
        config = _config(project, store, replay, make_args, _vcs_mode(project, commit, None, replay))
    except ConfigError as exc:
        logger.error("❌ %s", exc)
        sys.exit(EXIT_USAGE)
    sys.exit(run_guarded(cmd_init, config, commit, force, ReportFormat(fmt)))


@depsentry.command()
@_project_option
@_store_option
@_replay_option
@_make_arg_option
@_format_option
@click.option("--commit", default=None, help="Commit to analyse (git mode checks it out).")
@click.option("--diff", "diff", type=click.File("r", encoding="utf-8"), default=None,
              help="Unified diff of the commit ('-' reads stdin); the tree must already be at the commit.")
@click.option("--skip-irrelevant", is_flag=True, help="Skip commits without Source/Header/Makefile changes.")
def check(project, store, replay, make_args, fmt, commit, diff, skip_irrelevant):
    """Incremental check of one commit on top of the stored state."""
    diff_text = diff.read() if diff is not None else None
    try:
        config = _config(project, store, replay, make_args, _vcs_mode(project, commit, diff_text, replay),
                         skip_irrelevant)
    except ConfigError as exc:
        logger.error("❌ %s", exc)
        sys.exit(EXIT_USAGE)
    sys.exit(run_guarded(cmd_check, config, commit, diff_text, ReportFormat(fmt)))


@depsentry.command()
@_project_option
@_store_option
@_format_option
def report(project, store, fmt):
    """Print the findings of the last init/check."""
    try:
        config = _config(project, store, None, ())
    except ConfigError as exc:
        logger.error("❌ %s", exc)
        sys.exit(EXIT_USAGE)
    sys.exit(run_guarded(cmd_report, config, ReportFormat(fmt)))


@depsentry.command()
@_project_option
@_store_option
@_make_arg_option
@click.option("--report", "report_path", type=click.Path(path_type=Path), required=True,
              help="Machine-format report whose findings are probed.")
def verify(project, store, make_args, report_path):
    """Confirm findings with make experiments (timestamp touch for MD, prerequisite removal for RD)."""
    try:
        config = _config(project, store, None, make_args)
    except ConfigError as exc:
        logger.error("❌ %s", exc)
        sys.exit(EXIT_USAGE)
    sys.exit(run_guarded(cmd_verify, config, report_path))


# ----------------------------------------------------------------------------------------------------
# STANDALONE EXECUTION
# ----------------------------------------------------------------------------------------------------
if __name__ == "__main__":
    depsentry()
