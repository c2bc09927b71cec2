# ====================================================================================================
# P02_system_processes.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Provides system-level utilities: operating-environment detection, execution of external
#   tools (make, strace, git, the C compiler) and access to recorded outputs in replay mode.
# ----------------------------------------------------------------------------------------------------
# Usage:
#   • detect_os()          → kernel family (live tracing needs Linux).
#   • tool_available(name) → True when an executable is on PATH.
#   • run_command(args)    → runs a command, capturing stdout/stderr separately.
#   • ReplayDir            → resolves recorded traces / make output / diffs for a commit.
# ----------------------------------------------------------------------------------------------------
# These functions are used by the tracer, make adapter, change analyzer and oracle so that
# every external process is started the same way and logged the same way.
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

logger = logging.getLogger(__name__)

# Number of stderr lines kept when a command fails.
STDERR_TAIL_LINES = 20


# ----------------------------------------------------------------------------------------------------
# detect_os()
# ----------------------------------------------------------------------------------------------------
def detect_os() -> str:
    """
    Name the kernel family the checker runs on, as far as tracing cares.

    Returns:
        str: "Linux", "Linux (WSL)" (a Linux kernel under Windows), "macOS", "Windows",
             or the raw sys.platform value for anything else.

    Example:
        >>> detect_os()
        'Linux'
    """
    if sys.platform.startswith("linux"):
        release = platform.uname().release.lower()
        return "Linux (WSL)" if "microsoft" in release or "wsl" in release else "Linux"
    return {"darwin": "macOS", "win32": "Windows"}.get(sys.platform, sys.platform)


# ----------------------------------------------------------------------------------------------------
# tool_available()
# ----------------------------------------------------------------------------------------------------
def tool_available(name: str) -> bool:
    """Return True when `name` resolves to an executable on PATH."""
    return shutil.which(name) is not None


def live_tracing_supported() -> bool:
    """strace is ptrace-based: Linux kernels only."""
    return detect_os().startswith("Linux") and tool_available("strace")


# ----------------------------------------------------------------------------------------------------
# run_command()
# ----------------------------------------------------------------------------------------------------
@dataclass(frozen=True)
class CommandResult:
    """Outcome of one external command."""
    args: tuple
    returncode: int
    stdout: str
    stderr: str

    @property
    def ok(self) -> bool:
        return self.returncode == 0

    def stderr_tail(self, lines: int = STDERR_TAIL_LINES) -> str:
        return "\n".join(self.stderr.splitlines()[-lines:])


def run_command(args: Sequence[str], cwd=None, env: Optional[Mapping[str, str]] = None) -> CommandResult:
    """
    Run an external command, capturing stdout and stderr separately.

    Args:
        args (Sequence[str]): Program and arguments (never passed through a shell).
        cwd (str | Path, optional): Working directory (the project root for make).
        env (Mapping[str, str], optional): Extra environment variables merged over os.environ.

    Returns:
        CommandResult: Exit status plus decoded output (UTF-8, undecodable bytes replaced).

    Raises:
        FileNotFoundError: If the program itself cannot be found.

    Example:
        >>> run_command(["make", "-pn"], cwd="/repo").ok
        True
    """
    merged_env = None
    if env:
        merged_env = dict(os.environ)
        merged_env.update(env)

    logger.debug("running %s (cwd=%s)", shlex.join(args), cwd)
    t0 = time.time()
    proc = subprocess.run(
        list(args),
        cwd=None if cwd is None else str(cwd),
        env=merged_env,
        capture_output=True,
        text=True,
        encoding="utf-8",
        errors="replace",
    )
    logger.debug("%s exited %d in %.2fs", args[0], proc.returncode, time.time() - t0)
    return CommandResult(tuple(args), proc.returncode, proc.stdout, proc.stderr)


# ----------------------------------------------------------------------------------------------------
# ReplayDir
# ----------------------------------------------------------------------------------------------------
class ReplayDir:
    """
    Recorded build outputs used instead of executing make.

    Layout:
        <root>/<commit>/clean.trace
        <root>/<commit>/incremental.trace
        <root>/<commit>/targets/<target, "/" replaced by "__">.trace
        <root>/<commit>/make-db.txt
        <root>/<commit>/make-dryrun.txt
        <root>/<commit>/commit.diff
    A file missing under <commit>/ is looked up in <root>/ directly, so single-commit
    fixtures can keep everything flat.
    """

    CLEAN_TRACE = "clean.trace"
    INCREMENTAL_TRACE = "incremental.trace"
    MAKE_DB = "make-db.txt"
    MAKE_DRY_RUN = "make-dryrun.txt"
    COMMIT_DIFF = "commit.diff"

    def __init__(self, root):
        self.root = Path(root).absolute()

    def __repr__(self) -> str:
        return f"ReplayDir({str(self.root)!r})"

    @staticmethod
    def target_file_name(target: str) -> str:
        return target.replace("/", "__") + ".trace"

    def locate(self, commit: str, name: str) -> Optional[Path]:
        """Return the recorded file for `commit`, or None when nothing was recorded."""
        candidates = []
        if commit:
            candidates.append(self.root / commit / name)
        candidates.append(self.root / name)
        for candidate in candidates:
            if candidate.is_file():
                return candidate
        return None

    def target_trace(self, commit: str, target: str) -> Optional[Path]:
        return self.locate(commit, str(Path("targets") / self.target_file_name(target)))

    def read_text(self, commit: str, name: str) -> Optional[str]:
        path = self.locate(commit, name)
        if path is None:
            return None
        return path.read_text(encoding="utf-8")


# ----------------------------------------------------------------------------------------------------
# Standalone Execution (Diagnostic)
# ----------------------------------------------------------------------------------------------------
if __name__ == "__main__":
    print(f"Kernel: {detect_os()}")
    for tool in ("make", "strace", "git", "cc"):
        print(f"{tool:<7} {'✅' if tool_available(tool) else '❌'}")
    print(f"Live tracing supported: {live_tracing_supported()}")
