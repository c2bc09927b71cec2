# ====================================================================================================
# P04_static_lists.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Stores global static lists, codes and closed enumerations used throughout the checker.
#   These act as configuration-like reference structures, ensuring consistent suffix
#   classification, file-format codes and exit statuses across modules.
# ----------------------------------------------------------------------------------------------------
# Update Policy:
#   • Trace op codes and report kinds are part of on-disk formats: never renumber or rename.
#   • Suffix lists are defaults only; depsentry.toml may override the source/header lists.
# ----------------------------------------------------------------------------------------------------
# Example Usage:
#   from processes.P04_static_lists import FileKind, classify_file
#   classify_file("src/fzy.c")      # FileKind.SOURCE
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# Import Libraries required to adjust sys path
# ----------------------------------------------------------------------------------------------------
import sys                      # Provides access to system-level parameters and functions
from pathlib import Path        # Provides object-oriented filesystem path handling

# Add parent directory to system path to allow imports from `processes/`
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.dont_write_bytecode = True  # Prevents creation of __pycache__ directories

# Import shared project packages (declared centrally in P00_set_packages.py)
from processes.P00_set_packages import *

TOOL_VERSION = "1.0.0"

# ----------------------------------------------------------------------------------------------------
# File classification
# ----------------------------------------------------------------------------------------------------
DEFAULT_SOURCE_SUFFIXES = (".c", ".cpp", ".cc")
DEFAULT_HEADER_SUFFIXES = (".h", ".hpp")
MAKEFILE_BASENAMES      = ("Makefile", "makefile", "GNUmakefile")
MAKEFILE_SUFFIXES       = (".mk",)
OBJECT_SUFFIXES         = (".o", ".obj", ".lo")


class FileKind(Enum):
    SOURCE = "Source"
    HEADER = "Header"
    MAKEFILE = "Makefile"
    OTHER = "Other"


def classify_file(path: str,
                  source_suffixes: Sequence[str] = DEFAULT_SOURCE_SUFFIXES,
                  header_suffixes: Sequence[str] = DEFAULT_HEADER_SUFFIXES) -> FileKind:
    """
    Classify a path by basename and suffix only (never touches the filesystem).

    Example:
        >>> classify_file("src/Makefile")
        <FileKind.MAKEFILE: 'Makefile'>
        >>> classify_file("src/Readme")
        <FileKind.OTHER: 'Other'>
    """
    base = posixpath.basename(path)
    if base in MAKEFILE_BASENAMES or base.endswith(MAKEFILE_SUFFIXES):
        return FileKind.MAKEFILE
    suffix = posixpath.splitext(base)[1]
    if suffix in source_suffixes:
        return FileKind.SOURCE
    if suffix in header_suffixes:
        return FileKind.HEADER
    return FileKind.OTHER


def is_object_file(path: str) -> bool:
    return path.endswith(OBJECT_SUFFIXES)


# ----------------------------------------------------------------------------------------------------
# Path classification values (returned instead of a ProjectPath)
# ----------------------------------------------------------------------------------------------------
class PathClass(Enum):
    EXTERNAL = "External"
    UNRESOLVED = "Unresolved"


# ----------------------------------------------------------------------------------------------------
# Graph enumerations
# ----------------------------------------------------------------------------------------------------
class GraphKind(Enum):
    ACTUAL = "Actual"
    DECLARED = "Declared"


class Provenance(Enum):
    CLEAN_TRACE = "CleanTrace"
    INCREMENTAL_TRACE = "IncrementalTrace"
    INFERRED = "Inferred"


# ----------------------------------------------------------------------------------------------------
# Trace file op codes (one letter per event kind)
# ----------------------------------------------------------------------------------------------------
class TraceOp(Enum):
    READ = "R"
    WRITE = "W"
    CREATE = "C"
    DELETE = "D"
    RENAME = "N"
    EXEC = "X"
    SPAWN = "S"
    EXIT = "E"


PATH_OPS = (TraceOp.READ, TraceOp.WRITE, TraceOp.CREATE, TraceOp.DELETE, TraceOp.RENAME)


class BuildKind(Enum):
    CLEAN = "clean"
    INCREMENTAL = "incremental"
    SINGLE_TARGET = "target"


# Executables treated as make processes when attributing recipe subtrees.
MAKE_EXECUTABLES = ("make", "gmake", "gnumake")

# Syscalls requested from strace in live mode.
STRACE_SYSCALLS = (
    "execve", "clone", "clone3", "fork", "vfork",
    "open", "openat", "creat",
    "rename", "renameat", "renameat2",
    "unlink", "unlinkat",
    "symlink", "symlinkat", "link", "linkat",
    "chdir", "fchdir",
)


# ----------------------------------------------------------------------------------------------------
# GNU Make internal database (make -p) top-level section headers
# ----------------------------------------------------------------------------------------------------
MAKE_DB_SECTIONS = (
    "Variables",
    "Files",
    "Implicit Rules",
    "Directories",
    "Pattern-specific Variable Values",
    "VPATH Search Paths",
)

# Lines of `make -n -B --debug=basic` output that are debug chatter, not recipe text.
DRY_RUN_NOISE_PREFIXES = (
    "GNU Make", "Built for", "Copyright", "License GPLv3", "This is free software",
    "There is NO WARRANTY", "Reading makefiles", "Updating makefiles", "Updating goal targets",
    "File ", "Prerequisite ", "Successfully remade", "Finished prerequisites", "Considering target",
    "Pruning file", "No need to remake", "Trying ", "Looking for", "Avoiding implicit",
    "Must remake target", "Live child", "Reaping", "Removing child", "Putting child",
    "make: Nothing to be done", "make: '", "make: `",
)


# ----------------------------------------------------------------------------------------------------
# Findings, verdicts and exit codes
# ----------------------------------------------------------------------------------------------------
class FindingKind(Enum):
    MISSING = "MD"
    REDUNDANT = "RD"


class Evidence(Enum):
    TRACE = "Trace"
    INFERRED = "Inferred"
    HISTORICAL = "Historical"


class VerifyMethod(Enum):
    TIMESTAMP_MUTATION = "TimestampMutation"
    PREREQUISITE_REMOVAL = "PrerequisiteRemoval"


class ReportFormat(Enum):
    HUMAN = "human"
    MACHINE = "machine"


EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_BUILD_FAILURE = 2
EXIT_USAGE = 3
