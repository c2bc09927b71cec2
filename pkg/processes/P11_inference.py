# ====================================================================================================
# P11_inference.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Produces the actual dependency graph of a commit from:
#     • the historical graph (clean-build lineage, carried across commits),
#     • the traced incremental build of this commit,
#     • inferences from #include changes and from file additions, deletions and renames,
#     • forced single-target rebuilds of targets whose recipe changed but were not rebuilt.
# ----------------------------------------------------------------------------------------------------
# Precedence:
#   trace evidence > file-change inference > directive inference.
#   Incremental-trace nodes whose Source/Header dependencies were untouched by this commit keep
#   their historical Source/Header dependencies (traced ∪ historical) instead of being replaced.
# ----------------------------------------------------------------------------------------------------
# Update Policy:
#   Rebuilds run strictly one after another; concurrent single-target makes share build state.
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
from processes.P04_static_lists import (
    BuildKind, DEFAULT_HEADER_SUFFIXES, DEFAULT_SOURCE_SUFFIXES, FileKind, GraphKind, PathClass,
    Provenance, classify_file, is_object_file,
)
from processes.P05_exceptions import SourceIoError, TargetBuildFailed
from processes.P06_depgraph import (
    DependencyGraph, GraphDelta, TargetNode, apply_delta, empty_graph, graph_from_edge_map,
)
from processes.P08_make_adapter import RecipeSnapshot
from processes.P09_tracer import TraceProvider, build_actual_graph, run_traced_build
from processes.P10_change_analyzer import (
    CommitDelta, DirectiveChange, candidate_paths, include_dirs_from_recipe, resolve_include,
    transitive_includes,
)

logger = logging.getLogger(__name__)

_CODE_KINDS = (FileKind.SOURCE, FileKind.HEADER)


class RebuildReason(Enum):
    RECIPE_CHANGED = "RecipeChanged"
    NEW_SOURCE_UNCOVERED = "NewSourceUncovered"


# ====================================================================================================
# RESOLVER CONTEXT
# ====================================================================================================

@dataclass(frozen=True)
class ResolverContext:
    """Working-tree facts the inferences need: recipes (for -I flags), declared rules, suffixes."""
    project_root: str
    recipes: Optional[RecipeSnapshot] = None
    declared: Optional[DependencyGraph] = None
    source_suffixes: tuple = DEFAULT_SOURCE_SUFFIXES
    header_suffixes: tuple = DEFAULT_HEADER_SUFFIXES
    compiler: Optional[str] = None
    warnings: list = field(default_factory=list, compare=False)

    def kind(self, path: str) -> FileKind:
        return classify_file(path, self.source_suffixes, self.header_suffixes)

    def warn(self, message: str) -> None:
        logger.warning("⚠️ %s", message)
        self.warnings.append(message)

    def _recipe_mentions(self, path: str) -> list:
        commands = (self.recipes.commands or {}) if self.recipes else {}
        pattern = re.compile(r"(?:^|[\s=])" + re.escape(path) + r"(?:$|\s)", re.M)
        return [t for t, recipe in commands.items() if pattern.search(recipe)]

    def compiling_targets(self, file: str, graph: DependencyGraph) -> list:
        """Targets whose deps contain `file`, plus targets whose recipe names it."""
        targets = {t for t, node in graph.nodes.items() if file in node.deps}
        targets.update(t for t in self._recipe_mentions(file) if t != file)
        return sorted(targets)

    def search_paths_for(self, file: str, graph: DependencyGraph) -> list:
        """-I directories of the recipes compiling `file`; else the root and the file's directory."""
        commands = (self.recipes.commands or {}) if self.recipes else {}
        dirs = []
        for target in self.compiling_targets(file, graph):
            dirs.extend(include_dirs_from_recipe(commands.get(target, "")))
        dirs = list(more_itertools.unique_everseen(dirs))
        return dirs or ["", posixpath.dirname(file)]

    def object_for_source(self, source: str) -> list:
        """
        Object target(s) compiling an added source: declared rules first, then the declared
        directory/suffix pattern, then `<dir>/<stem>.o` when the dry run knows that target.
        """
        stem = posixpath.splitext(posixpath.basename(source))[0]
        if self.declared is not None:
            direct = sorted(t for t, node in self.declared.nodes.items()
                            if source in node.deps and is_object_file(t))
            if direct:
                return direct
            patterns = {}
            for target, node in self.declared.nodes.items():
                sources = [d for d in node.deps if self.kind(d) is FileKind.SOURCE]
                if is_object_file(target) and len(sources) == 1:
                    patterns.setdefault(posixpath.dirname(sources[0]),
                                        (posixpath.dirname(target), posixpath.splitext(target)[1]))
            if posixpath.dirname(source) in patterns:
                obj_dir, suffix = patterns[posixpath.dirname(source)]
                return [posixpath.join(obj_dir, stem + suffix)]
        guess = posixpath.join(posixpath.dirname(source), stem + ".o")
        if self.recipes is not None and guess in self.recipes.targets:
            return [guess]
        return []


# ====================================================================================================
# RESULT TYPES
# ====================================================================================================

@dataclass(frozen=True)
class InferredDelta:
    delta: GraphDelta = GraphDelta()
    pending: frozenset = frozenset()        # {(target, include spec, including file)}
    uncovered: frozenset = frozenset()      # added sources with no known object target


@dataclass(frozen=True)
class RebuildPlan:
    targets: frozenset = frozenset()
    reason: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class InferenceInputs:
    historical: DependencyGraph
    incremental: DependencyGraph
    directive_changes: Sequence[DirectiveChange]
    delta: CommitDelta
    recipe_diff: frozenset
    context: ResolverContext
    file_updates: Optional[InferredDelta] = None

    def __post_init__(self):
        if self.historical.kind is not GraphKind.ACTUAL or self.incremental.kind is not GraphKind.ACTUAL:
            raise ValueError("inference inputs must be Actual graphs")


def _delta_between(before: Mapping[str, set], after: Mapping[str, set]) -> GraphDelta:
    added, removed = set(), set()
    for target in set(before) | set(after):
        old, new = before.get(target, set()), after.get(target, set())
        added.update((target, d) for d in new - old)
        removed.update((target, d) for d in old - new)
    return GraphDelta(added, removed, set(after) - set(before), set(before) - set(after))


# ====================================================================================================
# INFERENCE
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# infer_directive_updates()
# ----------------------------------------------------------------------------------------------------
def infer_directive_updates(historical: DependencyGraph, changes: Sequence[DirectiveChange],
                            context: ResolverContext) -> InferredDelta:
    """
    Edge updates implied by #include additions and removals.

    For each changed file f and each target depending on f (or compiled from f per recipe):
        • an added include contributes its resolved header plus that header's own includes;
        • a removed include drops every header the target's source files no longer reach in the
          working tree; a target without source deps loses only the named header and the headers
          it pulled in;
        • External results are ignored; Unresolved additions become pending expectations.

    Example:
        a.c (−"b.h", +"d.h"), with a.o and liba.so depending on a.c
        → removes (a.o, b.h), (liba.so, b.h); adds (a.o, d.h), (liba.so, d.h)
    """
    if not changes:
        return InferredDelta()

    root = context.project_root
    edge_map = historical.edge_map()
    pending = set()
    closure_cache = {}

    def closure_of(source: str) -> Optional[frozenset]:
        if source not in closure_cache:
            try:
                closure_cache[source] = transitive_includes(
                    source, context.search_paths_for(source, historical), root, context.compiler, context.warnings)
            except SourceIoError:
                closure_cache[source] = None
        return closure_cache[source]

    def still_reached(target: str, header: str) -> bool:
        sources = [d for d in edge_map.get(target, ()) if context.kind(d) is FileKind.SOURCE]
        if not sources:
            return False
        for source in sources:
            reached = closure_of(source)
            if reached is None or header in reached:
                return True
        return False

    for change in changes:
        targets = context.compiling_targets(change.file, historical)
        if not targets:
            logger.debug("no target depends on %s; directive change ignored", change.file)
            continue
        search = context.search_paths_for(change.file, historical)

        for spec in sorted(change.added_includes):
            resolved = resolve_include(spec, change.file, search, root)
            if resolved is PathClass.EXTERNAL:
                continue
            if resolved is PathClass.UNRESOLVED:
                context.warn(f"{change.file}: #include {spec} unresolved; expecting trace evidence")
                pending.update((t, spec, change.file) for t in targets)
                continue
            try:
                headers = {resolved} | transitive_includes(resolved, search, root)
            except SourceIoError:
                headers = {resolved}
            for target in targets:
                edge_map.setdefault(target, set()).update(headers - {target})

        for spec in sorted(change.removed_includes):
            candidates = candidate_paths(spec, change.file, search, root)
            for target in targets:
                deps = edge_map.get(target)
                if deps is None:
                    continue
                if any(context.kind(d) is FileKind.SOURCE for d in deps):
                    # Deleted headers cannot be read: rescan every header dep.
                    dropped = {d for d in deps if context.kind(d) is FileKind.HEADER}
                else:
                    dropped = set()
                    for header in candidates:
                        if header not in deps:
                            continue
                        dropped.add(header)
                        try:
                            dropped |= transitive_includes(header, search, root)
                        except SourceIoError:
                            pass
                for path in sorted(dropped & deps):
                    if not still_reached(target, path):
                        deps.discard(path)

    return InferredDelta(_delta_between(historical.edge_map(), edge_map), frozenset(pending))


# ----------------------------------------------------------------------------------------------------
# infer_file_updates()
# ----------------------------------------------------------------------------------------------------
def infer_file_updates(historical: DependencyGraph, delta: CommitDelta, context: ResolverContext) -> InferredDelta:
    """
    Edge updates implied by file renames, deletions and additions.

    Steps performed:
        1. Renames rewrite node and edge paths; a renamed source also renames its object.
        2. A deleted Source removes its object node(s); any deleted file loses every edge to it;
           edges pointing at removed nodes go too.
        3. An added Source creates its object node with deps {source} ∪ its transitive includes,
           or is reported as uncovered when no object target can be determined.
        4. Other added files are ignored.
    """
    edge_map = historical.edge_map()
    uncovered = set()

    renames = dict(delta.renamed)
    for old, new in delta.renamed:
        if context.kind(old) is not FileKind.SOURCE:
            continue
        old_stem = posixpath.splitext(posixpath.basename(old))[0]
        new_stem = posixpath.splitext(posixpath.basename(new))[0]
        for target, deps in edge_map.items():
            if old in deps and is_object_file(target) and posixpath.basename(target).startswith(old_stem + "."):
                declared = context.object_for_source(new)
                renames.setdefault(target, declared[0] if declared else posixpath.join(
                    posixpath.dirname(target), new_stem + posixpath.splitext(target)[1]))
    if renames:
        renamed_map = {}
        for target, deps in edge_map.items():
            renamed_map.setdefault(renames.get(target, target), set()).update(renames.get(d, d) for d in deps)
        edge_map = {t: deps - {t} for t, deps in renamed_map.items()}

    removed_nodes = set()
    for path in delta.deleted_files:
        if context.kind(path) is FileKind.SOURCE:
            stem = posixpath.splitext(posixpath.basename(path))[0]
            objects = {t for t, deps in edge_map.items() if path in deps and is_object_file(t)}
            named = {t for t in objects if posixpath.splitext(posixpath.basename(t))[0] == stem}
            only_source = {t for t in objects
                           if {d for d in edge_map[t] if context.kind(d) is FileKind.SOURCE} == {path}}
            removed_nodes |= named or only_source
        if path in edge_map:
            removed_nodes.add(path)
    deleted = set(delta.deleted_files) | removed_nodes
    for target in removed_nodes:
        edge_map.pop(target, None)
    for deps in edge_map.values():
        deps -= deleted

    for path in delta.added_files:
        if context.kind(path) is not FileKind.SOURCE:
            continue
        objects = context.object_for_source(path)
        if not objects:
            context.warn(f"{path}: no compile pattern for new source; scheduling a rebuild")
            uncovered.add(path)
            continue
        try:
            includes = transitive_includes(path, context.search_paths_for(path, historical),
                                           context.project_root, context.compiler, context.warnings)
        except SourceIoError as exc:
            context.warn(str(exc))
            includes = frozenset()
        for obj in objects:
            edge_map.setdefault(obj, set()).update(({path} | includes) - {obj})

    return InferredDelta(_delta_between(historical.edge_map(), edge_map), uncovered=frozenset(uncovered))


# ====================================================================================================
# REBUILDS
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# plan_rebuilds()
# ----------------------------------------------------------------------------------------------------
def plan_rebuilds(recipe_diff: Iterable[str], incremental: DependencyGraph, uncovered: Iterable[str] = (),
                  buildable: Optional[Iterable[str]] = None, skip: Iterable[str] = ()) -> RebuildPlan:
    """
    Targets to rebuild individually: changed recipes not already traced this commit, plus the
    expected objects of uncovered new sources.

    Args:
        recipe_diff: Targets whose recipe changed (diff_recipes result).
        incremental: Graph of this commit's incremental trace.
        uncovered: Added sources with no known object target.
        buildable: When given, recipe targets outside it (absent from the new dry run) are skipped.
        skip: Targets never to plan (phony targets).
    """
    skip = set(skip)
    buildable = None if buildable is None else set(buildable)
    reason = {}
    for target in sorted(recipe_diff):
        if target in incremental or target in skip:
            continue
        if buildable is not None and target not in buildable:
            continue
        reason[target] = RebuildReason.RECIPE_CHANGED
    for source in sorted(uncovered):
        stem = posixpath.splitext(posixpath.basename(source))[0]
        target = posixpath.join(posixpath.dirname(source), stem + ".o")
        if target not in incremental and target not in reason:
            reason[target] = RebuildReason.NEW_SOURCE_UNCOVERED
    return RebuildPlan(frozenset(reason), MappingProxyType(reason))


# ----------------------------------------------------------------------------------------------------
# execute_rebuilds()
# ----------------------------------------------------------------------------------------------------
def execute_rebuilds(plan: RebuildPlan, project_root, make_args: Sequence[str] = (), *,
                     provider: Optional[TraceProvider] = None, store=None, commit: str = "") -> tuple:
    """
    Run `make -B <target>` under tracing for each planned target, one at a time.

    Returns:
        tuple[DependencyGraph, list[TargetBuildFailed]]: Union graph of the per-target traces,
        and the failures (remaining targets are still attempted).
    """
    edge_map = {}
    failures = []
    for target in sorted(plan.targets):
        logger.info("⏳ Rebuilding %s (%s)", target, plan.reason[target].value)
        try:
            trace = run_traced_build(project_root, make_args, BuildKind.SINGLE_TARGET, target,
                                     provider=provider, store=store, commit=commit)
        except TargetBuildFailed as exc:
            logger.warning("⚠️ %s", exc)
            failures.append(exc)
            continue
        for name, node in build_actual_graph(trace, commit).nodes.items():
            edge_map.setdefault(name, set()).update(node.deps)
    if not edge_map:
        return empty_graph(GraphKind.ACTUAL), failures
    return graph_from_edge_map(edge_map, GraphKind.ACTUAL, provenance=Provenance.INCREMENTAL_TRACE,
                               commit=commit), failures


# ====================================================================================================
# MERGE
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# merge()
# ----------------------------------------------------------------------------------------------------
def merge(inputs: InferenceInputs, rebuild_graph: DependencyGraph, warnings: Optional[list] = None) -> DependencyGraph:
    """
    Combine history, inferences and traces into the commit's actual graph.

    Steps performed:
        1. Applies the file-change delta, then the directive delta (computed on the result),
           both restricted to targets not traced this commit.
        2. Replaces every traced target's deps with its traced inputs (rebuild traces win over
           the incremental trace). An incremental node with a Source/Header input whose
           Source/Header deps were untouched by directive changes, deletions and renames
           keeps its historical Source/Header deps as well.
        3. Clears pending include expectations of traced targets; the rest become warnings.
        4. Prunes nodes whose file is gone from the working tree and that no declared rule
           produces. Edges of untraced targets to them stay as last recorded.

    Returns:
        DependencyGraph: The merged Actual graph, root_commit = the commit under analysis.

    Raises:
        CycleError: The combined edges form a cycle.
    """
    warnings = warnings if warnings is not None else []
    context = inputs.context
    commit = inputs.delta.commit_id
    historical = inputs.historical
    traced = inputs.incremental.targets | rebuild_graph.targets

    file_updates = inputs.file_updates or infer_file_updates(historical, inputs.delta, context)
    graph = apply_delta(historical, file_updates.delta.restricted(traced), commit, warnings)
    directive_updates = infer_directive_updates(graph, inputs.directive_changes, context)
    graph = apply_delta(graph, directive_updates.delta.restricted(traced), commit, warnings)

    touched = {change.file for change in inputs.directive_changes}
    touched.update(inputs.delta.deleted_files)
    touched.update(path for pair in inputs.delta.renamed for path in pair)

    nodes = dict(graph.nodes)
    for target in sorted(traced):
        if target in rebuild_graph:
            deps = set(rebuild_graph.deps_of(target))
        else:
            deps = set(inputs.incremental.deps_of(target))
            past = historical.deps_of(target)
            code_now = {d for d in deps if context.kind(d) in _CODE_KINDS}
            code_past = {d for d in past if context.kind(d) in _CODE_KINDS}
            if code_now and not ((code_now | code_past) & touched):
                deps |= code_past
        deps.discard(target)
        nodes[target] = TargetNode(target, frozenset(deps), Provenance.INCREMENTAL_TRACE, commit)

    for target, spec, file in sorted(directive_updates.pending):
        if target not in traced:
            warnings.append(f"{target}: #include {spec} in {file} is still unresolved")

    if context.declared is not None:
        root = Path(context.project_root)
        stale = {t for t in nodes if t not in context.declared and not (root / t).exists()}
        if stale:
            logger.info("🧹 Pruning %d stale nodes", len(stale))
            nodes = {t: n for t, n in nodes.items() if t not in stale}
    return DependencyGraph(nodes, GraphKind.ACTUAL, commit)
