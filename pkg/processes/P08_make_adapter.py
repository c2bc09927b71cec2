# ====================================================================================================
# P08_make_adapter.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Everything the checker learns from GNU Make itself:
#     • the declared dependency graph, from the internal database (`make -pn`) with phony
#       targets expanded away;
#     • per-target recipe snapshots, from a forced dry run (`make -n -B --debug=basic`),
#       and their differences between commits;
#     • the persisted recipe digests (<store>/recipes.v1).
# ----------------------------------------------------------------------------------------------------
# Usage:
#   text  = dump_database(project_root, make_args)
#   graph = expand_phony(parse_internal_db(text), project_root)
#   snap  = snapshot_recipes(dump_dry_run(project_root, make_args), commit, project_root)
#   changed = diff_recipes(load_recipes(store), snap)
# ----------------------------------------------------------------------------------------------------
# Notes:
#   • Make is invoked exactly as `make -pn` and `make -n -B --debug=basic`, extra arguments
#     appended, from the project root, stdout and stderr captured separately.
#   • In replay mode the recorded make-db.txt / make-dryrun.txt of the commit are read instead.
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
from processes.P01_set_file_paths import store_paths
from processes.P02_system_processes import ReplayDir, run_command
from processes.P03_shared_functions import (
    atomic_write_text, escape_field, is_project_path, normalize_path, sha256_hex, unescape_field,
)
from processes.P04_static_lists import DRY_RUN_NOISE_PREFIXES, GraphKind, MAKE_DB_SECTIONS, Provenance
from processes.P05_exceptions import (
    BuildFailed, CycleError, InvalidPath, ParseError, StateCorrupt, StateMissing, TracerUnavailable,
)
from processes.P06_depgraph import DependencyGraph, TargetNode

logger = logging.getLogger(__name__)

RECIPES_FORMAT_VERSION = 1

_DB_MARKER = "# Make data base"
_SECTION_RE = re.compile(r"^# (?P<name>[A-Z][\w-]*(?: [\w-]+)*)$")
_RULE_RE = re.compile(r"^(?P<targets>[^:#=\t][^:#=]*?)(?P<colons>::?)(?:\s+(?P<prereqs>.*))?$")
_TARGET_VAR_RE = re.compile(r"^\S+\s*(?::{1,3}=|\+=|\?=|!=|=)")
_REMAKE_RE = re.compile(r"Must remake target [`'](?P<target>.+)'\.")
_DIR_RE = re.compile(r"^\S*make(?:\[\d+\])?: (?P<action>Entering|Leaving) directory [`'](?P<dir>.+)'$")
_RECIPE_PREFIX_CHARS = "@-+"
_RECIPES_HEADER_RE = re.compile(r"^#depsentry-recipes v(?P<version>\d+) commit=(?P<commit>.*)$")


# ====================================================================================================
# DECLARED RULES
# ====================================================================================================

@dataclass
class DeclaredRule:
    target: str
    prerequisites: list = field(default_factory=list)
    order_only: list = field(default_factory=list)
    is_phony: bool = False
    recipe_lines: list = field(default_factory=list)
    double_colon: bool = False

    def __post_init__(self):
        if not self.target:
            raise ValueError("DeclaredRule target must be nonempty")


# ----------------------------------------------------------------------------------------------------
# parse_internal_db()
# ----------------------------------------------------------------------------------------------------
def parse_internal_db(text: str) -> list:
    """
    Parse the `# Files` section of GNU Make's internal database into DeclaredRules.

    Steps performed:
        • Starts at the "# Make data base" marker (or the first line when absent).
        • Tracks the top-level section headers; an unknown header is a ParseError.
        • Skips "# Not a target:" entries and special ".X" targets, but reads .PHONY membership.
        • Reads the "#  Phony target" annotation and the recipe lines after "#  recipe to execute".
        • Splits prerequisites at "|" into normal and order-only lists.
        • Merges double-colon rules into one rule (union of prerequisites, concatenated recipes).

    Args:
        text (str): stdout of `make -pn`.

    Returns:
        list[DeclaredRule]: Rules in database order, .PHONY membership applied.

    Raises:
        ParseError: Empty input, no Files section, or an unrecognized section header.

    Example:
        >>> rules = parse_internal_db(db_text)
        >>> [(r.target, r.prerequisites, r.is_phony) for r in rules]
        [('all', ['app'], True), ('app', ['a.o', 'b.o'], False)]
    """
    if not text.strip():
        raise ParseError("empty make database", 1)

    lines = text.splitlines()
    start = next((i for i, line in enumerate(lines) if line.startswith(_DB_MARKER)), 0)

    rules = {}
    phony_names = set()
    section = None
    saw_files = False
    entry = []
    entry_start = 0

    def flush():
        if entry:
            _parse_entry(entry, entry_start, rules, phony_names)

    for index in range(start, len(lines)):
        line = lines[index]
        number = index + 1
        header = _SECTION_RE.match(line)
        blank_before = index == 0 or not lines[index - 1].strip()
        blank_after = index + 1 >= len(lines) or not lines[index + 1].strip()
        if header and blank_before and blank_after:
            name = header["name"]
            if name not in MAKE_DB_SECTIONS:
                raise ParseError(f"unrecognized make database section {name!r}", number)
            if section == "Files":
                flush()
                entry = []
            section = name
            saw_files = saw_files or name == "Files"
            continue
        if section != "Files":
            continue
        if not line.strip():
            flush()
            entry = []
            continue
        if not entry:
            entry_start = number
        entry.append(line)
    if section == "Files":
        flush()

    if not saw_files:
        raise ParseError("no '# Files' section; was the text produced by `make -pn`?", start + 1)

    for name in phony_names:
        if name in rules:
            rules[name].is_phony = True
        else:
            rules[name] = DeclaredRule(name, is_phony=True)
    return list(rules.values())


def _parse_entry(entry: list, first_line: int, rules: dict, phony_names: set) -> None:
    if entry[0].startswith("# Not a target"):
        return
    rule_index = next((i for i, line in enumerate(entry) if not line.startswith("#")), None)
    if rule_index is None:
        return
    rule_line = entry[rule_index]
    if rule_line.startswith("\t"):
        return
    tail = rule_line.partition(":")[2].lstrip(":")
    if tail.startswith("=") or _TARGET_VAR_RE.match(tail.strip()):
        # Variable assignment (global or target-specific), not a rule.
        return
    match = _RULE_RE.match(rule_line)
    if match is None:
        raise ParseError(f"unparseable rule line {rule_line!r}", first_line + rule_index)

    prereq_text = match["prereqs"] or ""
    normal_text, _, order_text = prereq_text.partition("|")
    prerequisites = normal_text.split()
    order_only = order_text.split()
    is_phony = any(line.startswith("#  Phony target") for line in entry)

    recipe = []
    in_recipe = False
    for line in entry[rule_index + 1:]:
        if line.startswith("#  recipe to execute"):
            in_recipe = True
            continue
        if in_recipe and line.startswith("\t"):
            recipe.append(line[1:])
        elif in_recipe and not line.startswith("#"):
            in_recipe = False

    for target in match["targets"].split():
        if target == ".PHONY":
            phony_names.update(prerequisites)
            continue
        if target.startswith("."):
            continue
        existing = rules.get(target)
        if existing is None:
            rules[target] = DeclaredRule(target, list(prerequisites), list(order_only), is_phony,
                                         list(recipe), match["colons"] == "::")
            continue
        existing.prerequisites.extend(p for p in prerequisites if p not in existing.prerequisites)
        existing.order_only.extend(p for p in order_only if p not in existing.order_only)
        existing.recipe_lines.extend(recipe)
        existing.is_phony = existing.is_phony or is_phony
        existing.double_colon = existing.double_colon or match["colons"] == "::"


# ----------------------------------------------------------------------------------------------------
# expand_phony()
# ----------------------------------------------------------------------------------------------------
def expand_phony(rules: Sequence[DeclaredRule], project_root: str,
                 stats: Optional[Counter] = None) -> DependencyGraph:
    """
    Build the Declared graph from parsed rules with phony targets elided.

    A prerequisite naming a phony target is replaced by that phony's transitive non-phony
    prerequisites; phony targets never become nodes. Paths are normalized against the project
    root; External prerequisites are dropped and counted in stats["externals_dropped"].
    Rules with neither prerequisites nor a recipe (FORCE-style stubs, `-MP` header stubs)
    produce no node.

    Raises:
        CycleError: A phony target depends on itself through other phony targets.
    """
    stats = stats if stats is not None else Counter()
    by_target = {rule.target: rule for rule in rules}
    phony = {rule.target for rule in rules if rule.is_phony}

    phony_graph = nx.DiGraph()
    phony_graph.add_nodes_from(phony)
    for name in phony:
        rule = by_target[name]
        phony_graph.add_edges_from((name, p) for p in rule.prerequisites + rule.order_only if p in phony)
    if not nx.is_directed_acyclic_graph(phony_graph):
        cycle = [u for u, _ in nx.find_cycle(phony_graph)]
        raise CycleError("phony cycle: " + " -> ".join(cycle + cycle[:1]), cycle)

    @lru_cache(maxsize=None)
    def real_prereqs(name: str) -> frozenset:
        rule = by_target[name]
        found = set()
        for prereq in rule.prerequisites + rule.order_only:
            if prereq in phony:
                found |= real_prereqs(prereq)
            else:
                found.add(prereq)
        return frozenset(found)

    def project(raw: str):
        try:
            value = normalize_path(raw, project_root)
        except InvalidPath:
            stats["invalid_paths"] += 1
            return None
        if not is_project_path(value):
            stats["externals_dropped"] += 1
            return None
        return value

    nodes = {}
    for rule in rules:
        if rule.is_phony or not (rule.prerequisites or rule.order_only or rule.recipe_lines):
            continue
        target = project(rule.target)
        if target is None:
            continue
        deps, order_only = set(), set()
        for raw_list, bucket in ((rule.prerequisites, deps), (rule.order_only, order_only)):
            for raw in raw_list:
                expanded = real_prereqs(raw) if raw in phony else (raw,)
                for name in expanded:
                    path = project(name)
                    if path is not None and path != target:
                        bucket.add(path)
        if target in nodes:
            old = nodes[target]
            deps |= old.deps - old.order_only
            order_only |= old.order_only
        order_only -= deps
        all_deps = frozenset(deps | order_only)
        nodes[target] = TargetNode(target, all_deps, Provenance.INFERRED, "", frozenset(order_only))
    return DependencyGraph(nodes, GraphKind.DECLARED)


def phony_targets(rules: Sequence[DeclaredRule], project_root: str) -> frozenset:
    """Phony target names, normalized where they look like project paths."""
    names = set()
    for rule in rules:
        if not rule.is_phony:
            continue
        names.add(rule.target)
        try:
            value = normalize_path(rule.target, project_root)
        except InvalidPath:
            continue
        if is_project_path(value):
            names.add(value)
    return frozenset(names)


# ====================================================================================================
# RECIPE SNAPSHOTS
# ====================================================================================================

@dataclass(frozen=True, eq=False)
class RecipeSnapshot:
    """target → sha-256 of canonical recipe text; full text kept in memory for the current run."""
    commit: str
    digests: Mapping[str, str]
    commands: Optional[Mapping[str, str]] = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, RecipeSnapshot):
            return NotImplemented
        return dict(self.digests) == dict(other.digests)

    __hash__ = None

    def __len__(self) -> int:
        return len(self.digests)

    @property
    def targets(self) -> frozenset:
        return frozenset(self.digests)


def canonical_recipe(lines: Iterable[str]) -> str:
    """Strip trailing whitespace and leading @/-/+ prefixes; drop empty lines."""
    out = []
    for line in lines:
        line = line.rstrip().lstrip()
        line = line.lstrip(_RECIPE_PREFIX_CHARS).lstrip()
        if line:
            out.append(line)
    return "\n".join(out)


def _is_noise(line: str) -> bool:
    stripped = line.strip()
    if not stripped:
        return True
    if stripped.startswith(DRY_RUN_NOISE_PREFIXES):
        return True
    return re.match(r"^\S*make(?:\[\d+\])?: ", stripped) is not None


# ----------------------------------------------------------------------------------------------------
# snapshot_recipes()
# ----------------------------------------------------------------------------------------------------
def snapshot_recipes(text: str, commit: str = "", project_root: Optional[str] = None) -> RecipeSnapshot:
    """
    Associate each "Must remake target" marker of a forced dry run with the command lines
    echoed until the next marker.

    Args:
        text (str): Output of `make -n -B --debug=basic`.
        commit (str): Commit the dry run was taken at.
        project_root (str, optional): When given, targets are normalized to project paths
            (recursive-make "Entering directory" lines rebase them); External targets are skipped.

    Returns:
        RecipeSnapshot: One entry per remade target, with canonical text and digests.

    Raises:
        ParseError: No remake markers (make was not run with -B --debug=basic).
    """
    commands = {}
    dir_stack = [project_root] if project_root else [""]
    current = None
    buffer = []
    saw_marker = False

    def close():
        if current is not None:
            text_ = canonical_recipe(buffer)
            commands[current] = (commands[current] + "\n" + text_).strip("\n") if current in commands else text_

    for line in text.splitlines():
        directory = _DIR_RE.match(line.strip())
        if directory:
            if directory["action"] == "Entering":
                dir_stack.append(directory["dir"])
            elif len(dir_stack) > 1:
                dir_stack.pop()
            continue
        remake = _REMAKE_RE.search(line)
        if remake:
            close()
            saw_marker = True
            buffer = []
            current = _snapshot_target(remake["target"], dir_stack[-1], project_root)
            continue
        if current is None or _is_noise(line):
            continue
        buffer.append(line)
    close()

    if not saw_marker:
        raise ParseError("no 'Must remake target' markers; run make with -n -B --debug=basic")
    commands.pop(None, None)
    digests = {target: sha256_hex(recipe) for target, recipe in commands.items()}
    return RecipeSnapshot(commit, MappingProxyType(digests), MappingProxyType(commands))


def _snapshot_target(raw: str, directory: str, project_root: Optional[str]):
    if not project_root:
        return raw
    joined = raw if raw.startswith("/") else posixpath.join(directory, raw)
    try:
        value = normalize_path(joined, project_root)
    except InvalidPath:
        return None
    return value if is_project_path(value) else None


# ----------------------------------------------------------------------------------------------------
# diff_recipes()
# ----------------------------------------------------------------------------------------------------
def diff_recipes(old: RecipeSnapshot, new: RecipeSnapshot) -> frozenset:
    """Targets whose canonical recipe differs, plus targets present in only one snapshot."""
    changed = {t for t in old.targets & new.targets if old.digests[t] != new.digests[t]}
    return frozenset(changed | (old.targets ^ new.targets))


def missing_from_dry_run(declared: DependencyGraph, snapshot: RecipeSnapshot) -> list:
    """Declared targets the forced dry run never listed."""
    return sorted(declared.targets - snapshot.targets)


# ----------------------------------------------------------------------------------------------------
# lint_soft_links()
# ----------------------------------------------------------------------------------------------------
_SEGMENT_SPLIT_RE = re.compile(r"&&|\|\||[;|\n]")


def soft_link_without_force(recipe: str) -> bool:
    """True when a recipe runs `ln -s` (or --symbolic) without -f/--force."""
    for segment in _SEGMENT_SPLIT_RE.split(recipe):
        try:
            words = shlex.split(segment)
        except ValueError:
            words = segment.split()
        if not words or posixpath.basename(words[0]) != "ln":
            continue
        short = "".join(w[1:] for w in words[1:] if w.startswith("-") and not w.startswith("--"))
        long_opts = {w for w in words[1:] if w.startswith("--")}
        symbolic = "s" in short or "--symbolic" in long_opts
        forced = "f" in short or "--force" in long_opts
        if symbolic and not forced:
            return True
    return False


def lint_soft_links(snapshot: RecipeSnapshot, targets: Iterable[str]) -> list:
    """Warnings for the given targets whose recipe creates a soft link without -f."""
    commands = snapshot.commands or {}
    warnings = []
    for target in sorted(set(targets)):
        recipe = commands.get(target)
        if recipe and soft_link_without_force(recipe):
            warnings.append(f"{target}: recipe uses `ln -s` without -f; an existing link is never "
                            f"replaced, so findings on this target may be false positives (use `ln -sf`)")
    return warnings


# ====================================================================================================
# PERSISTENCE
# ====================================================================================================

def save_recipes(snapshot: RecipeSnapshot, store) -> Path:
    paths = store_paths(store)
    paths.root.mkdir(parents=True, exist_ok=True)
    lines = [f"#depsentry-recipes v{RECIPES_FORMAT_VERSION} commit={snapshot.commit}"]
    lines.extend(f"{escape_field(t)}\t{snapshot.digests[t]}" for t in sorted(snapshot.digests))
    atomic_write_text(paths.recipes, "\n".join(lines) + "\n")
    return paths.recipes


def load_recipes(store) -> RecipeSnapshot:
    path = store_paths(store).recipes
    if not path.is_file():
        raise StateMissing(f"no recipe snapshot in {path.parent}")
    lines = path.read_text(encoding="utf-8").splitlines()
    header = _RECIPES_HEADER_RE.match(lines[0]) if lines else None
    if header is None or int(header["version"]) != RECIPES_FORMAT_VERSION:
        raise StateCorrupt(f"{path}: bad header")
    digests = {}
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        target, sep, digest = line.rpartition("\t")
        if not sep or not re.fullmatch(r"[0-9a-f]{64}", digest):
            raise StateCorrupt(f"{path}:{number}: expected target<TAB>sha256")
        digests[unescape_field(target)] = digest
    return RecipeSnapshot(header["commit"], MappingProxyType(digests))


# ====================================================================================================
# MAKE INVOCATION
# ====================================================================================================

def _recorded(replay: ReplayDir, commit: str, name: str) -> str:
    text = replay.read_text(commit, name)
    if text is None:
        raise TracerUnavailable(f"no recorded {name} for commit {commit or '<none>'} in {replay.root}")
    return text


def dump_database(project_root, make_args: Sequence[str] = (), replay: Optional[ReplayDir] = None,
                  commit: str = "") -> str:
    """Text of `make -pn <make_args>` (or the recorded make-db.txt in replay mode)."""
    if replay is not None:
        return _recorded(replay, commit, ReplayDir.MAKE_DB)
    result = run_command(["make", "-pn", *make_args], cwd=project_root)
    if not result.ok and _DB_MARKER not in result.stdout:
        raise BuildFailed(result.returncode, result.stderr_tail())
    return result.stdout


def dump_dry_run(project_root, make_args: Sequence[str] = (), replay: Optional[ReplayDir] = None,
                 commit: str = "") -> str:
    """Text of `make -n -B --debug=basic <make_args>` (or the recorded make-dryrun.txt)."""
    if replay is not None:
        return _recorded(replay, commit, ReplayDir.MAKE_DRY_RUN)
    result = run_command(["make", "-n", "-B", "--debug=basic", *make_args], cwd=project_root)
    if not result.ok:
        raise BuildFailed(result.returncode, result.stderr_tail())
    return result.stdout


def declared_graph(text: str, project_root: str, stats: Optional[Counter] = None) -> tuple:
    """(Declared graph, parsed rules) for one database dump."""
    rules = parse_internal_db(text)
    return expand_phony(rules, project_root, stats), rules
