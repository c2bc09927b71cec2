# ====================================================================================================
# P01_set_file_paths.py
# ----------------------------------------------------------------------------------------------------
# Centralized definition of the state-store layout used between commits.
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   • Provides consistent, single-source path references for every persisted artifact
#     (actual graph, recipe digests, metadata, last report, lock file, recorded traces).
#   • Ensures other modules (depgraph, make adapter, tracer, pipeline) can import paths
#     without hardcoding or duplicating directory logic.
# ----------------------------------------------------------------------------------------------------
# Update Policy:
#   • File names carry a format version suffix (".v1"). Bump the suffix together with the
#     header version of the corresponding writer; never reuse a name for a new format.
# ----------------------------------------------------------------------------------------------------
# Example Usage:
#   from processes.P01_set_file_paths import store_paths
#   paths = store_paths(Path("/repo/.depsentry"))
#   paths.actual_graph        # /repo/.depsentry/actual-graph.v1
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# Import Libraries required to adjust sys path
# ----------------------------------------------------------------------------------------------------
import sys                      # Provides access to system-level parameters and functions
from pathlib import Path        # Provides object-oriented filesystem path handling

# Add parent directory to system path to allow imports from `processes/`
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.dont_write_bytecode = True  # Prevents creation of __pycache__ directories

# Import project-wide dependencies (defined once in P00_set_packages.py)
from processes.P00_set_packages import *

# ----------------------------------------------------------------------------------------------------
# Store File Names
# ----------------------------------------------------------------------------------------------------
# Adjust only together with the matching reader/writer.
ACTUAL_GRAPH_FILE = "actual-graph.v1"
RECIPES_FILE      = "recipes.v1"
META_FILE         = "meta.v1"
REPORT_FILE       = "report.v1"
LOCK_FILE         = "depsentry.lock"
TRACES_DIR        = "traces"
SNAPSHOT_PREFIX   = "snapshot-"       # <store>/snapshot-XXXX/ holds graph, recipes and report of one state

# Default store folder (inside the project) when neither --store nor DEPSENTRY_STORE is given.
DEFAULT_STORE_NAME = ".depsentry"
STORE_ENV_VAR      = "DEPSENTRY_STORE"


# ----------------------------------------------------------------------------------------------------
# StorePaths
# ----------------------------------------------------------------------------------------------------
@dataclass(frozen=True)
class StorePaths:
    """All persisted artifacts of one store directory."""
    root: Path
    actual_graph: Path
    recipes: Path
    meta: Path
    report: Path
    lock: Path
    traces: Path


def store_paths(store_dir) -> StorePaths:
    """
    Build the StorePaths for a store directory.

    Args:
        store_dir (str | Path): The state directory (need not exist yet).

    Returns:
        StorePaths: Absolute paths of every artifact in the store.

    Example:
        >>> store_paths("/repo/.depsentry").meta
        PosixPath('/repo/.depsentry/meta.v1')
    """
    root = Path(store_dir).expanduser().absolute()
    return StorePaths(
        root=root,
        actual_graph=root / ACTUAL_GRAPH_FILE,
        recipes=root / RECIPES_FILE,
        meta=root / META_FILE,
        report=root / REPORT_FILE,
        lock=root / LOCK_FILE,
        traces=root / TRACES_DIR,
    )


def default_store_dir(project_root) -> Path:
    """Store directory used when none is configured: $DEPSENTRY_STORE, else <project>/.depsentry."""
    from_env = os.getenv(STORE_ENV_VAR, "").strip()
    if from_env:
        return Path(from_env).expanduser().absolute()
    return Path(project_root).absolute() / DEFAULT_STORE_NAME
