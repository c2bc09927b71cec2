# ====================================================================================================
# P10_change_analyzer.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Parses one commit's unified diff into structured changes and resolves C pre-processor
#   #include directives against the working tree.
# ----------------------------------------------------------------------------------------------------
# Functions:
#   • parse_diff(text, project_root)                → CommitDelta (modified / added / deleted / renamed).
#   • extract_directive_changes(delta)              → DirectiveChange per Source/Header file.
#   • resolve_include(spec, including_file, dirs)   → project path, External or Unresolved.
#   • transitive_includes(file, dirs)               → fixed point of resolve_include.
#   • include_dirs_from_recipe(recipe)              → -I / -iquote / -isystem directories.
# ----------------------------------------------------------------------------------------------------
# Notes:
#   • Conditional includes count as unconditional here; observed builds correct them later.
#   • `#include MACRO` resolves to Unresolved with a warning.
#   • The working tree must not change while these functions run.
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
from processes.P02_system_processes import run_command, tool_available
from processes.P03_shared_functions import is_project_path, normalize_path
from processes.P04_static_lists import (
    DEFAULT_HEADER_SUFFIXES, DEFAULT_SOURCE_SUFFIXES, FileKind, PathClass, classify_file,
)
from processes.P05_exceptions import InvalidPath, ParseError, SourceIoError

logger = logging.getLogger(__name__)

# `include_next` continues a system search path; the word boundary keeps it out.
INCLUDE_RE = re.compile(r'^\s*#\s*include\b\s*(?P<spec>"[^"]+"|<[^>]+>|[A-Za-z_]\w*)')
_HUNK_HEADER_RE = re.compile(r"^@@ -\d+(?:,\d+)? \+\d+(?:,\d+)? @@")
_DEV_NULL = "/dev/null"


# ====================================================================================================
# DOMAIN TYPES
# ====================================================================================================

@dataclass(frozen=True)
class CommitDelta:
    commit_id: str = ""
    modified: tuple = ()            # ((path, (hunk text, ...)), ...)
    added_files: tuple = ()
    deleted_files: tuple = ()
    renamed: tuple = ()             # ((old, new), ...)
    renamed_hunks: tuple = ()       # ((new path, (hunk text, ...)), ...)
    makefile_changed: bool = False

    def __post_init__(self):
        seen = Counter()
        seen.update(path for path, _ in self.modified)
        seen.update(self.added_files)
        seen.update(self.deleted_files)
        seen.update(path for pair in self.renamed for path in pair)
        repeated = sorted(path for path, count in seen.items() if count > 1)
        if repeated:
            raise ValueError(f"paths listed in more than one change category: {repeated}")

    @property
    def is_empty(self) -> bool:
        return not (self.modified or self.added_files or self.deleted_files or self.renamed)

    def changed_paths(self) -> frozenset:
        paths = {path for path, _ in self.modified}
        paths.update(self.added_files, self.deleted_files)
        paths.update(path for pair in self.renamed for path in pair)
        return frozenset(paths)

    def rename_map(self) -> dict:
        return dict(self.renamed)


@dataclass(frozen=True)
class DirectiveChange:
    file: str
    added_includes: frozenset = frozenset()
    removed_includes: frozenset = frozenset()

    def __post_init__(self):
        if self.added_includes & self.removed_includes:
            raise ValueError(f"{self.file}: include both added and removed")


# ====================================================================================================
# DIFF PARSING
# ====================================================================================================

def _strip_prefix(name: str) -> str:
    name = name.strip()
    if name.startswith('"') and name.endswith('"'):
        name = name[1:-1]
    if name.startswith(("a/", "b/")):
        return name[2:]
    return name


def _validate_hunk_headers(text: str) -> None:
    for number, line in enumerate(text.splitlines(), start=1):
        if line.startswith("@@") and not _HUNK_HEADER_RE.match(line):
            raise ParseError(f"malformed hunk header {line!r}", number)


# ----------------------------------------------------------------------------------------------------
# parse_diff()
# ----------------------------------------------------------------------------------------------------
def parse_diff(text: str, project_root: str, commit_id: str = "",
               source_suffixes: Sequence[str] = DEFAULT_SOURCE_SUFFIXES,
               header_suffixes: Sequence[str] = DEFAULT_HEADER_SUFFIXES) -> CommitDelta:
    """
    Parse a unified diff (git style, rename markers honoured) into a CommitDelta.

    Args:
        text (str): The diff. An empty string yields an empty CommitDelta.
        project_root (str): Absolute project root; diff paths are relative to it.
        commit_id (str): Identifier stored on the result.

    Returns:
        CommitDelta: Modified files with their hunks, added/deleted files, renames (with any
        content hunks) and whether a Makefile changed.

    Raises:
        ParseError: Malformed hunk header (with its line number) or an inconsistent diff.

    Example:
        >>> d = parse_diff(open("f061893.diff").read(), "/Example-master")
        >>> [p for p, _ in d.modified], d.makefile_changed
        (['src/fzy.c'], True)
    """
    if not text.strip():
        return CommitDelta(commit_id)

    _validate_hunk_headers(text)
    try:
        patch = PatchSet(text)
    except UnidiffParseError as exc:
        raise ParseError(f"invalid unified diff: {exc}") from exc

    def project(raw: str) -> Optional[str]:
        try:
            value = normalize_path(raw, project_root)
        except InvalidPath:
            logger.warning("⚠️ ignoring diff path %r", raw)
            return None
        return value if is_project_path(value) else None

    modified, added, deleted, renamed, renamed_hunks = [], [], [], [], []
    for patched in patch:
        info = [str(line).rstrip("\n") for line in (patched.patch_info or [])]
        rename_from = next((l[len("rename from "):] for l in info if l.startswith("rename from ")), None)
        rename_to = next((l[len("rename to "):] for l in info if l.startswith("rename to ")), None)
        is_new = patched.is_added_file or any(l.startswith("new file mode") for l in info)
        is_gone = patched.is_removed_file or any(l.startswith("deleted file mode") for l in info)

        source = _strip_prefix(patched.source_file or "")
        target = _strip_prefix(patched.target_file or "")
        hunks = tuple(str(hunk) for hunk in patched)

        if is_new:
            path = project(target if target != _DEV_NULL else patched.path)
            if path:
                added.append(path)
            continue
        if is_gone:
            path = project(source if source != _DEV_NULL else patched.path)
            if path:
                deleted.append(path)
            continue
        if rename_from is None and source and target and source != target:
            rename_from, rename_to = source, target
        if rename_from is not None and rename_to is not None:
            old, new = project(rename_from), project(rename_to)
            if old and new:
                renamed.append((old, new))
                if hunks:
                    renamed_hunks.append((new, hunks))
            continue
        path = project(target or patched.path)
        if path:
            modified.append((path, hunks))

    all_paths = [p for p, _ in modified] + added + deleted + [p for pair in renamed for p in pair]
    makefile_changed = any(classify_file(p, source_suffixes, header_suffixes) is FileKind.MAKEFILE
                           for p in all_paths)
    return CommitDelta(commit_id, tuple(modified), tuple(added), tuple(deleted), tuple(renamed),
                       tuple(renamed_hunks), makefile_changed)


def is_build_relevant(delta: CommitDelta,
                      source_suffixes: Sequence[str] = DEFAULT_SOURCE_SUFFIXES,
                      header_suffixes: Sequence[str] = DEFAULT_HEADER_SUFFIXES) -> bool:
    """True when any changed path is a Source, Header or Makefile."""
    return any(classify_file(p, source_suffixes, header_suffixes) is not FileKind.OTHER
               for p in delta.changed_paths())


# ----------------------------------------------------------------------------------------------------
# extract_directive_changes()
# ----------------------------------------------------------------------------------------------------
def _changed_lines(hunk_text: str) -> tuple:
    added, removed = set(), set()
    for line in hunk_text.splitlines()[1:]:
        if line.startswith("+") and not line.startswith("+++"):
            match = INCLUDE_RE.match(line[1:])
            if match:
                added.add(match["spec"])
        elif line.startswith("-") and not line.startswith("---"):
            match = INCLUDE_RE.match(line[1:])
            if match:
                removed.add(match["spec"])
    return added, removed


def extract_directive_changes(delta: CommitDelta,
                              source_suffixes: Sequence[str] = DEFAULT_SOURCE_SUFFIXES,
                              header_suffixes: Sequence[str] = DEFAULT_HEADER_SUFFIXES) -> list:
    """
    Collect #include additions and removals from the ± lines of Source/Header hunks.

    A directive removed and re-added verbatim in the same file cancels out. Renamed files
    report their content changes under the new name.
    """
    changes = []
    for path, hunks in list(delta.modified) + list(delta.renamed_hunks):
        if classify_file(path, source_suffixes, header_suffixes) not in (FileKind.SOURCE, FileKind.HEADER):
            continue
        added, removed = set(), set()
        for hunk in hunks:
            hunk_added, hunk_removed = _changed_lines(hunk)
            added |= hunk_added
            removed |= hunk_removed
        added, removed = added - removed, removed - added
        if added or removed:
            changes.append(DirectiveChange(path, frozenset(added), frozenset(removed)))
    return changes


# ====================================================================================================
# INCLUDE RESOLUTION
# ====================================================================================================

def include_dirs_from_recipe(recipe: str, recipe_dir: str = "") -> list:
    """
    Directories named by -I, -iquote and -isystem in a recipe, in command-line order.

    Example:
        >>> include_dirs_from_recipe("cc -Iinclude -I src -c -o a.o a.c")
        ['include', 'src']
    """
    dirs = []
    for line in recipe.splitlines():
        try:
            words = shlex.split(line)
        except ValueError:
            words = line.split()
        pending = False
        for word in words:
            if pending:
                dirs.append(word)
                pending = False
            elif word in ("-I", "-iquote", "-isystem", "-idirafter"):
                pending = True
            elif word.startswith("-I") and len(word) > 2:
                dirs.append(word[2:])
    if recipe_dir:
        dirs = [d if d.startswith("/") else posixpath.join(recipe_dir, d) for d in dirs]
    return list(more_itertools.unique_everseen(dirs))


def _spec_parts(spec: str) -> tuple:
    """("quoted" | "angled" | "macro", name)."""
    if spec.startswith('"') and spec.endswith('"') and len(spec) > 2:
        return "quoted", spec[1:-1]
    if spec.startswith("<") and spec.endswith(">") and len(spec) > 2:
        return "angled", spec[1:-1]
    return "macro", spec


def _candidate_dirs(style: str, including_file: str, search_paths: Sequence[str], project_root: str) -> list:
    root = str(project_root)
    dirs = []
    if style == "quoted":
        dirs.append(posixpath.join(root, posixpath.dirname(including_file)))
    for entry in search_paths:
        dirs.append(entry if posixpath.isabs(entry) else posixpath.join(root, entry))
    return dirs


def candidate_paths(spec: str, including_file: str, search_paths: Sequence[str], project_root: str) -> list:
    """Project paths an include could name, without checking existence (for removed includes)."""
    style, name = _spec_parts(spec)
    if style == "macro":
        return []
    out = []
    for directory in _candidate_dirs(style, including_file, search_paths, project_root):
        try:
            value = normalize_path(posixpath.join(directory, name), project_root)
        except InvalidPath:
            continue
        if is_project_path(value):
            out.append(value)
    return list(more_itertools.unique_everseen(out))


# ----------------------------------------------------------------------------------------------------
# resolve_include()
# ----------------------------------------------------------------------------------------------------
def resolve_include(spec: str, including_file: str, search_paths: Sequence[str], project_root: str):
    """
    Resolve one include spec against the working tree.

    Quoted includes search the including file's directory, then search_paths; angled includes
    search search_paths only and fall back to External (system header). The first existing
    file wins.

    Args:
        spec (str): '"fzy.h"', '<stdio.h>' or a macro name.
        including_file (str): Project path of the file containing the directive.
        search_paths (Sequence[str]): Include directories (project-relative or absolute).
        project_root (str): Absolute project root.

    Returns:
        str | PathClass: Project path, PathClass.EXTERNAL or PathClass.UNRESOLVED.

    Example:
        >>> resolve_include('"fzy.h"', "src/fzy.c", [], "/Example-master")
        'src/fzy.h'
        >>> resolve_include("<stdio.h>", "src/fzy.c", [], "/Example-master")
        <PathClass.EXTERNAL: 'External'>
    """
    style, name = _spec_parts(spec)
    if style == "macro":
        logger.warning("⚠️ %s: #include %s needs macro expansion; left unresolved", including_file, spec)
        return PathClass.UNRESOLVED

    if posixpath.isabs(name):
        candidates = [name]
    else:
        candidates = [posixpath.join(d, name)
                      for d in _candidate_dirs(style, including_file, search_paths, project_root)]
    for candidate in candidates:
        if os.path.isfile(candidate):
            try:
                return normalize_path(candidate, project_root)
            except InvalidPath:
                return PathClass.UNRESOLVED
    return PathClass.EXTERNAL if style == "angled" else PathClass.UNRESOLVED


# ----------------------------------------------------------------------------------------------------
# transitive_includes()
# ----------------------------------------------------------------------------------------------------
def _read_includes(path: Path) -> list:
    text = path.read_text(encoding="utf-8", errors="replace")
    return [m["spec"] for m in map(INCLUDE_RE.match, text.splitlines()) if m]


def transitive_includes(file: str, search_paths: Sequence[str], project_root: str,
                        compiler: Optional[str] = None, warnings: Optional[list] = None) -> frozenset:
    """
    Every project header reachable from `file` through #include directives.

    Steps performed:
        1. Breadth-first walk of resolve_include results with a visited set (cycle-safe).
        2. Excludes `file` itself, External and Unresolved results.
        3. When `compiler` is set and available, compares with `<compiler> -MM` and logs
           (and collects) any discrepancy as a warning; the walk's result is returned.

    Raises:
        SourceIoError: `file` cannot be read.
    """
    root = Path(project_root)
    try:
        first = _read_includes(root / file)
    except OSError as exc:
        raise SourceIoError(file, exc.strerror or str(exc)) from exc

    found = set()
    queue = deque((spec, file) for spec in first)
    while queue:
        spec, includer = queue.popleft()
        resolved = resolve_include(spec, includer, search_paths, project_root)
        if not is_project_path(resolved) or resolved == file or resolved in found:
            continue
        found.add(resolved)
        try:
            queue.extend((nested, resolved) for nested in _read_includes(root / resolved))
        except OSError as exc:
            logger.debug("cannot read %s: %s", resolved, exc)

    if compiler:
        _cross_check(file, frozenset(found), search_paths, project_root, compiler, warnings)
    return frozenset(found)


def _cross_check(file: str, found: frozenset, search_paths: Sequence[str], project_root: str,
                 compiler: str, warnings: Optional[list]) -> None:
    if not tool_available(compiler):
        logger.debug("compiler %s not on PATH; skipping -MM cross-check", compiler)
        return
    args = [compiler, "-MM", *(f"-I{d}" for d in search_paths), file]
    result = run_command(args, cwd=project_root)
    if not result.ok:
        logger.debug("%s -MM failed for %s", compiler, file)
        return
    rule = result.stdout.replace("\\\n", " ")
    _, _, deps_text = rule.partition(":")
    compiler_deps = set()
    for raw in deps_text.split():
        try:
            value = normalize_path(raw, project_root)
        except InvalidPath:
            continue
        if is_project_path(value) and value != file:
            compiler_deps.add(value)
    if compiler_deps != found:
        message = (f"{file}: include scan differs from `{compiler} -MM` "
                   f"(only scan: {sorted(found - compiler_deps)}, only compiler: {sorted(compiler_deps - found)})")
        logger.warning("⚠️ %s", message)
        if warnings is not None:
            warnings.append(message)
