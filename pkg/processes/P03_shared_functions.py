# ====================================================================================================
# P03_shared_functions.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Contains small, reusable helper functions that are shared across multiple modules.
#   These typically perform path normalization, hashing, escaping and atomic file writes.
# ----------------------------------------------------------------------------------------------------
# Current Functions:
#   • normalize_path(raw, project_root)    → project-relative path, or PathClass.EXTERNAL.
#   • atomic_write_text(path, text)        → write via temp file + rename (readers never see halves).
#   • sha256_hex(text)                     → digest used for recipe persistence.
#   • escape_field(text) / unescape_field  → TAB/newline-safe columns for line-oriented formats.
#   • matches_any(path, globs)             → exclude-glob matching.
# ----------------------------------------------------------------------------------------------------
# Update Policy:
#   Keep this file focused on small, generic utilities that do not depend on graphs, traces
#   or make. Larger, context-specific helpers should live in their own process module.
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# Import Libraries required to adjust sys path
# ----------------------------------------------------------------------------------------------------
import sys                      # Provides access to system-specific parameters and functions
from pathlib import Path        # Offers an object-oriented interface for filesystem paths

# Add parent directory to system path to allow imports from `processes/`
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.dont_write_bytecode = True  # Prevents creation of __pycache__ directories

# Import shared project packages (declared centrally in P00_set_packages.py)
from processes.P00_set_packages import *
from processes.P04_static_lists import PathClass
from processes.P05_exceptions import InvalidPath


# ----------------------------------------------------------------------------------------------------
# normalize_path()
# ----------------------------------------------------------------------------------------------------
def _lexical(path: str) -> str:
    norm = posixpath.normpath(path)
    # POSIX keeps a leading "//"; the checker treats it as "/".
    if norm.startswith("//"):
        norm = "/" + norm.lstrip("/")
    return norm


@lru_cache(maxsize=64)
def _root_aliases(root: str) -> tuple:
    aliases = [root]
    resolved = os.path.realpath(root)
    if resolved != root:
        aliases.append(resolved)
    return tuple(aliases)


def normalize_path(raw: str, project_root: str):
    """
    Turn a raw (absolute or relative) path into a project-relative path.

    Steps performed:
        • Rejects NUL bytes, empty strings and separator-only paths.
        • Joins relative paths onto the project root.
        • Normalizes segments lexically ("." and ".." never survive).
        • Accepts the project root under its literal name or its symlink-resolved name.

    Args:
        raw (str): Path as seen in a trace, make database, diff or include resolution.
        project_root (str): Absolute path of the project root.

    Returns:
        str | PathClass: Forward-slash path relative to the root, or PathClass.EXTERNAL
        when the path lies outside the project.

    Raises:
        InvalidPath: Malformed input, or a path that names the project root itself.

    Example:
        >>> normalize_path("/Example-master/src/fzy.c", "/Example-master")
        'src/fzy.c'
        >>> normalize_path("/usr/include/stdio.h", "/Example-master")
        <PathClass.EXTERNAL: 'External'>
    """
    if not raw or "\0" in raw:
        raise InvalidPath(f"malformed path {raw!r}")
    if raw.strip("/") == "":
        raise InvalidPath(f"separator-only path {raw!r}")
    if not project_root or not posixpath.isabs(project_root) or "\0" in project_root:
        raise InvalidPath(f"project root must be absolute, got {project_root!r}")

    root = _lexical(str(project_root))
    joined = raw if posixpath.isabs(raw) else posixpath.join(root, raw)
    norm = _lexical(joined)

    for base in _root_aliases(root):
        if norm == base:
            raise InvalidPath(f"{raw!r} names the project root itself")
        prefix = base if base.endswith("/") else base + "/"
        if norm.startswith(prefix):
            return norm[len(prefix):]
    return PathClass.EXTERNAL


def is_project_path(value) -> bool:
    """True for a normalized project path (as opposed to a PathClass value)."""
    return isinstance(value, str)


# ----------------------------------------------------------------------------------------------------
# atomic_write_text()
# ----------------------------------------------------------------------------------------------------
def atomic_write_text(path, text: str) -> None:
    """
    Write `text` to `path` atomically: the data goes to a temporary file in the same
    directory, is flushed to disk, then renamed over the destination.

    Args:
        path (str | Path): Destination file; its directory must exist.
        text (str): Full file content (UTF-8, LF line endings are kept as given).
    """
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp_name)
        raise


# ----------------------------------------------------------------------------------------------------
# sha256_hex()
# ----------------------------------------------------------------------------------------------------
def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ----------------------------------------------------------------------------------------------------
# escape_field() / unescape_field()
# ----------------------------------------------------------------------------------------------------
_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def escape_field(text: str) -> str:
    """Escape backslash, TAB, LF and CR so a value fits in one TAB-separated column."""
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def unescape_field(text: str) -> str:
    out = []
    chars = iter(text)
    for ch in chars:
        if ch != "\\":
            out.append(ch)
            continue
        nxt = next(chars, "")
        out.append(_UNESCAPES.get(nxt, "\\" + nxt))
    return "".join(out)


# ----------------------------------------------------------------------------------------------------
# matches_any()
# ----------------------------------------------------------------------------------------------------
def matches_any(path: str, globs: Iterable[str]) -> bool:
    return any(fnmatch.fnmatchcase(path, pattern) for pattern in globs)
