# ====================================================================================================
# P05_exceptions.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   The single exception hierarchy of the checker. Library modules raise these; only the
#   entry points in main/ translate them into exit codes and user-facing messages.
# ----------------------------------------------------------------------------------------------------
# Exit-code mapping (applied in main/M01_check_pipeline.py):
#   BuildFailed, TracerUnavailable            → 2
#   StateError, ConfigError, ParseError, ...  → 3
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# Import Libraries required to adjust sys path
# ----------------------------------------------------------------------------------------------------
import sys                      # Provides access to system-level parameters and functions
from pathlib import Path        # Provides object-oriented filesystem path handling

# Add parent directory to system path to allow imports from `processes/`
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.dont_write_bytecode = True  # Prevents creation of __pycache__ directories


class DepsentryError(Exception):
    """Base class of every error raised by the checker."""


class InvalidPath(DepsentryError):
    """A raw path is malformed (NUL byte, empty) or names the project root itself."""


class CycleError(DepsentryError):
    """A graph operation would introduce a cycle (self-edges included)."""

    def __init__(self, message: str, cycle=()):
        super().__init__(message)
        self.cycle = tuple(cycle)


class ParseError(DepsentryError):
    """Input text (make database, dry run, diff, trace, report) could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


# ----------------------------------------------------------------------------------------------------
# State store
# ----------------------------------------------------------------------------------------------------
class StateError(DepsentryError):
    """Base class for state-store problems."""


class StateMissing(StateError):
    """The store holds no saved state yet (run `depsentry init`)."""


class StateCorrupt(StateError):
    """A state file exists but cannot be read back consistently."""


class StateLocked(StateError):
    """Another check currently owns the store."""


# ----------------------------------------------------------------------------------------------------
# Builds and tracing
# ----------------------------------------------------------------------------------------------------
class BuildFailed(DepsentryError):
    def __init__(self, status: int, stderr_tail: str = ""):
        super().__init__(f"build exited with status {status}")
        self.status = status
        self.stderr_tail = stderr_tail


class TracerUnavailable(DepsentryError):
    """Live tracing is not possible on this host (use --replay)."""


class TargetBuildFailed(DepsentryError):
    def __init__(self, target: str, status: int | None = None, detail: str = ""):
        super().__init__(f"single-target rebuild of {target} failed" + (f": {detail}" if detail else ""))
        self.target = target
        self.status = status
        self.detail = detail


class SourceIoError(DepsentryError):
    """A source or header needed for include analysis could not be read."""

    def __init__(self, path: str, reason: str = ""):
        super().__init__(f"cannot read {path}" + (f": {reason}" if reason else ""))
        self.path = path


# ----------------------------------------------------------------------------------------------------
# Ground-truth probes
# ----------------------------------------------------------------------------------------------------
class ProbeFailed(DepsentryError):
    def __init__(self, target: str, detail: str = ""):
        super().__init__(f"probe build for {target} failed" + (f": {detail}" if detail else ""))
        self.target = target
        self.detail = detail


class RewriteFailed(DepsentryError):
    def __init__(self, target: str, dependency: str):
        super().__init__(f"no rule line for {target} lists {dependency} literally")
        self.target = target
        self.dependency = dependency


class ConfigError(DepsentryError):
    """Invalid configuration value or file."""
