# ====================================================================================================
# P13_oracle.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Confirms or rejects individual findings by running make experiments:
#     • MD → TimestampMutation   : push the dependency's mtime past every file in the tree, run make,
#                                  confirmed when the target was NOT rebuilt; mtimes restored after.
#     • RD → PrerequisiteRemoval : in a scratch copy, drop the prerequisite from the rule, delete the
#                                  generated files, build the target; confirmed when the build succeeds.
# ----------------------------------------------------------------------------------------------------
# Update Policy:
#   Probes run one at a time. verify_md owns the project tree while it runs; verify_rd never
#   writes to the project tree.
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
from processes.P01_set_file_paths import DEFAULT_STORE_NAME
from processes.P02_system_processes import run_command
from processes.P03_shared_functions import escape_field
from processes.P04_static_lists import FileKind, FindingKind, VerifyMethod, classify_file
from processes.P05_exceptions import ProbeFailed, RewriteFailed
from processes.P12_detector import Finding

logger = logging.getLogger(__name__)

# Seconds added past the newest mtime in the tree (covers 1-second mtime filesystems).
MTIME_BUMP_SECONDS = 2
SKIPPED_DIRS = (".git", ".hg", ".svn", DEFAULT_STORE_NAME)

_ASSIGN_RE = re.compile(r"^\s*(?:override\s+|export\s+)?(?P<name>[A-Za-z_][\w.]*)\s*(?P<op>:{1,3}=|[+?!]?=)\s*(?P<value>.*)$")
_RULE_RE = re.compile(r"^(?P<targets>[^\t#:=][^#:=]*?)\s*(?P<colon>::?)(?![=:])(?P<rest>.*)$")
_VAR_REF_RE = re.compile(r"\$(?:\((?P<paren>[^()$]+)\)|\{(?P<brace>[^{}$]+)\})")


@dataclass(frozen=True)
class Verdict:
    finding: Finding
    confirmed: bool
    method: VerifyMethod
    detail: str = ""

    def __post_init__(self):
        expected = (VerifyMethod.TIMESTAMP_MUTATION if self.finding.kind is FindingKind.MISSING
                    else VerifyMethod.PREREQUISITE_REMOVAL)
        if self.method is not expected:
            raise ValueError(f"{self.method.value} does not verify {self.finding.kind.value} findings")

    def line(self) -> str:
        return "\t".join((self.finding.kind.value, escape_field(self.finding.target),
                          escape_field(self.finding.dependency), "true" if self.confirmed else "false",
                          self.method.value))


def _walk_files(root: Path) -> Iterator[Path]:
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = [d for d in dirnames if d not in SKIPPED_DIRS]
        for name in filenames:
            yield Path(dirpath) / name


def _mtime_ns(path: Path) -> Optional[int]:
    try:
        return path.stat().st_mtime_ns
    except FileNotFoundError:
        return None


# ====================================================================================================
# MD: TIMESTAMP MUTATION
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# verify_md()
# ----------------------------------------------------------------------------------------------------
def verify_md(finding: Finding, project_root, make_args: Sequence[str] = ()) -> Verdict:
    """
    Touch the dependency and see whether make rebuilds the target.

    Steps performed:
        1. Sets the dependency's mtime to (newest mtime in the tree + 2 s).
        2. Runs `make <make_args> <target>`; the target is rebuilt iff its mtime changed.
        3. Restores the dependency's original times and re-runs make until `make -q` is clean.

    Returns:
        Verdict: confirmed=True when the target was NOT rebuilt.

    Raises:
        ProbeFailed: The target is not built yet, or make fails during the probe.
    """
    root = Path(project_root)
    dep_path, target_path = root / finding.dependency, root / finding.target
    before = _mtime_ns(target_path)
    if before is None:
        raise ProbeFailed(finding.target, "target is not built; run make first")
    try:
        original = dep_path.stat()
    except FileNotFoundError as exc:
        raise ProbeFailed(finding.target, f"dependency {finding.dependency} does not exist") from exc

    newest = max((p.stat().st_mtime for p in _walk_files(root) if not p.is_symlink()), default=time.time())
    bumped = newest + MTIME_BUMP_SECONDS
    logger.info("⏳ Touching %s (mtime +%ss) and rebuilding %s", finding.dependency, MTIME_BUMP_SECONDS, finding.target)

    try:
        os.utime(dep_path, (original.st_atime, bumped))
        result = run_command(["make", *make_args, finding.target], cwd=root)
        if not result.ok:
            raise ProbeFailed(finding.target, result.stderr_tail())
        after = _mtime_ns(target_path)
    finally:
        os.utime(dep_path, ns=(original.st_atime_ns, original.st_mtime_ns))

    if not run_command(["make", "-q", *make_args], cwd=root).ok:
        settle = run_command(["make", *make_args], cwd=root)
        if not settle.ok:
            logger.warning("⚠️ make did not settle after probing %s: %s", finding.target, settle.stderr_tail())

    rebuilt = after != before
    detail = f"{finding.target} {'rebuilt' if rebuilt else 'not rebuilt'} after touching {finding.dependency}"
    return Verdict(finding, not rebuilt, VerifyMethod.TIMESTAMP_MUTATION, detail)


# ====================================================================================================
# RD: PREREQUISITE REMOVAL
# ====================================================================================================

def _logical_lines(text: str) -> list:
    """Makefile lines with backslash continuations joined; each entry is (first index, last index, text)."""
    physical = text.split("\n")
    merged, start, parts = [], 0, []
    for index, line in enumerate(physical):
        if not parts:
            start = index
        if line.endswith("\\") and not line.startswith("\t"):
            parts.append(line[:-1])
            continue
        parts.append(line)
        merged.append((start, index, " ".join(p.strip() if i else p.rstrip() for i, p in enumerate(parts))))
        parts = []
    if parts:
        merged.append((start, len(physical) - 1, " ".join(parts)))
    return merged


def _variables(lines: Sequence[tuple]) -> dict:
    values = {}
    for _, _, line in lines:
        if line.startswith("\t"):
            continue
        match = _ASSIGN_RE.match(line)
        if match is None:
            continue
        name, op, value = match.group("name", "op", "value")
        if op == "?=" and name in values:
            continue
        values[name] = f"{values.get(name, '')} {value.strip()}".strip() if op == "+=" else value.strip()
    return values


def _expand(text: str, values: Mapping[str, str], depth: int = 0) -> str:
    if depth > 10 or "$" not in text:
        return text

    def substitute(match):
        name = match.group("paren") or match.group("brace")
        return _expand(values.get(name.strip(), ""), values, depth + 1)

    return _VAR_REF_RE.sub(substitute, text)


def _rewrite_rule(text: str, makefile_dir: str, target: str, dependency: str) -> Optional[str]:
    """Return `text` with `dependency` dropped from every rule line of `target`, or None if none lists it."""
    lines = _logical_lines(text)
    values = _variables(lines)
    physical = text.split("\n")
    replacements = {}

    def as_path(word: str) -> str:
        return posixpath.normpath(posixpath.join(makefile_dir, word)) if makefile_dir else posixpath.normpath(word)

    for first, last, line in lines:
        if line.startswith("\t") or _ASSIGN_RE.match(line):
            continue
        match = _RULE_RE.match(line)
        if match is None:
            continue
        if target not in {as_path(w) for w in _expand(match.group("targets"), values).split()}:
            continue
        rest, _, inline_recipe = match.group("rest").partition(";")
        changed, words = False, []
        for word in rest.split():
            expanded = _expand(word, values).split()
            if dependency not in {as_path(w) for w in expanded}:
                words.append(word)
                continue
            changed = True
            words.extend(w for w in expanded if as_path(w) != dependency)
        if changed:
            new_line = f"{match.group('targets')}{match.group('colon')} {' '.join(words)}".rstrip()
            if inline_recipe:
                new_line += f" ;{inline_recipe}"
            replacements[first] = (last, new_line)

    if not replacements:
        return None
    out, index = [], 0
    while index < len(physical):
        if index in replacements:
            last, new_line = replacements[index]
            out.append(new_line)
            index = last + 1
            continue
        out.append(physical[index])
        index += 1
    return "\n".join(out)


# ----------------------------------------------------------------------------------------------------
# verify_rd()
# ----------------------------------------------------------------------------------------------------
def verify_rd(finding: Finding, project_root, make_args: Sequence[str] = (),
              generated: Iterable[str] = ()) -> Verdict:
    """
    Drop the prerequisite in a scratch copy and build the target from scratch.

    Args:
        finding (Finding): An RD finding.
        project_root: The project (copied, never modified).
        make_args (Sequence[str]): Extra make arguments.
        generated (Iterable[str]): Build outputs to delete in the copy before building
            (the targets of the actual graph), so the build starts from a clean state.

    Returns:
        Verdict: confirmed=True when `make <target>` succeeds without the prerequisite.

    Raises:
        RewriteFailed: No makefile rule line for the target lists the prerequisite,
            even after simple variable substitution.
    """
    root = Path(project_root)
    with tempfile.TemporaryDirectory(prefix="depsentry-rd-") as scratch:
        copy = Path(scratch) / root.name
        shutil.copytree(root, copy, symlinks=True, ignore=shutil.ignore_patterns(*SKIPPED_DIRS))

        rewritten = []
        for makefile in sorted(_walk_files(copy)):
            relative = makefile.relative_to(copy).as_posix()
            if classify_file(relative) is not FileKind.MAKEFILE:
                continue
            text = makefile.read_text(encoding="utf-8", errors="replace")
            new_text = _rewrite_rule(text, posixpath.dirname(relative), finding.target, finding.dependency)
            if new_text is not None:
                makefile.write_text(new_text, encoding="utf-8")
                rewritten.append(relative)
        if not rewritten:
            raise RewriteFailed(finding.target, finding.dependency)
        logger.debug("removed %s from %s in %s", finding.dependency, finding.target, ", ".join(rewritten))

        for output in generated:
            with contextlib.suppress(FileNotFoundError, IsADirectoryError):
                (copy / output).unlink()

        result = run_command(["make", *make_args, finding.target], cwd=copy)

    detail = (f"{finding.target} builds without {finding.dependency}" if result.ok
              else f"{finding.target} fails without {finding.dependency}: {result.stderr_tail(3)}")
    return Verdict(finding, result.ok, VerifyMethod.PREREQUISITE_REMOVAL, detail)


# ----------------------------------------------------------------------------------------------------
# verify_findings()
# ----------------------------------------------------------------------------------------------------
def verify_findings(findings: Iterable[Finding], project_root, make_args: Sequence[str] = (),
                    generated: Iterable[str] = ()) -> list:
    """
    Run the matching probe for every finding, in order. A probe that cannot run
    (ProbeFailed, RewriteFailed) yields an unconfirmed verdict carrying the error text.
    """
    generated = tuple(generated)
    verdicts = []
    for finding in findings:
        if finding.kind is FindingKind.MISSING:
            method, probe = VerifyMethod.TIMESTAMP_MUTATION, lambda f: verify_md(f, project_root, make_args)
        else:
            method, probe = VerifyMethod.PREREQUISITE_REMOVAL, lambda f: verify_rd(f, project_root, make_args, generated)
        try:
            verdict = probe(finding)
        except (ProbeFailed, RewriteFailed) as exc:
            logger.error("❌ %s", exc)
            verdict = Verdict(finding, False, method, str(exc))
        logger.info("%s %s %s -> %s", "✅" if verdict.confirmed else "❌", finding.kind.value,
                    finding.target, finding.dependency)
        verdicts.append(verdict)
    return verdicts
