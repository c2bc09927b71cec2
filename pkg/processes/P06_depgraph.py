# ====================================================================================================
# P06_depgraph.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   The dependency-graph model shared by every stage of the checker: construction, mutation
#   (as new graphs), merge plumbing, diffing, and durable persistence between commits.
# ----------------------------------------------------------------------------------------------------
# Model:
#   • TargetNode       → one target with its direct dependency set (flat edges, no closure).
#   • DependencyGraph  → immutable map target → TargetNode, kind Actual or Declared, acyclic.
#   • GraphDelta       → added/removed edges and nodes between two graphs of the same kind.
# ----------------------------------------------------------------------------------------------------
# Persistence:
#   <store>/actual-graph.v1  header "#depsentry-graph v1 kind=<kind> root_commit=<id>",
#                            then one JSON node record per line, sorted by target.
#   <store>/meta.v1          key=value lines: project_root, root_commit, tool_version.
#   Writes go through atomic_write_text (temp file + rename).
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
from processes.P03_shared_functions import atomic_write_text, matches_any
from processes.P04_static_lists import GraphKind, Provenance, TOOL_VERSION
from processes.P05_exceptions import CycleError, StateCorrupt, StateMissing

logger = logging.getLogger(__name__)

GRAPH_FORMAT_VERSION = 1
_GRAPH_HEADER_RE = re.compile(r"^#depsentry-graph v(?P<version>\d+) kind=(?P<kind>\w+) root_commit=(?P<commit>.*)$")


# ====================================================================================================
# DOMAIN TYPES
# ====================================================================================================

@dataclass(frozen=True)
class TargetNode:
    """A target and the files it directly depends on."""
    target: str
    deps: frozenset = frozenset()
    provenance: Provenance = Provenance.INFERRED
    last_updated_commit: str = ""
    # Subset of deps declared after "|" in a Make rule (Declared graphs only).
    order_only: frozenset = frozenset()

    def __post_init__(self):
        deps = frozenset(self.deps)
        object.__setattr__(self, "deps", deps)
        object.__setattr__(self, "order_only", frozenset(self.order_only) & deps)
        if self.target in deps:
            raise CycleError(f"self-edge on {self.target}", (self.target, self.target))


@dataclass(frozen=True, eq=False)
class DependencyGraph:
    """
    Immutable dependency graph. Every operation that "changes" a graph returns a new one,
    so instances can be shared freely between readers.
    """
    nodes: Mapping[str, TargetNode]
    kind: GraphKind
    root_commit: str = ""

    def __post_init__(self):
        nodes = dict(self.nodes)
        for key, node in nodes.items():
            if key != node.target:
                raise ValueError(f"node key {key!r} does not match its target {node.target!r}")
        _check_acyclic(nodes)
        object.__setattr__(self, "nodes", MappingProxyType(nodes))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DependencyGraph):
            return NotImplemented
        return (self.kind == other.kind and self.root_commit == other.root_commit
                and dict(self.nodes) == dict(other.nodes))

    __hash__ = None

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, target) -> bool:
        return target in self.nodes

    @property
    def targets(self) -> frozenset:
        return frozenset(self.nodes)

    def deps_of(self, target: str) -> frozenset:
        node = self.nodes.get(target)
        return node.deps if node is not None else frozenset()

    def edges(self) -> frozenset:
        return frozenset((t, d) for t, node in self.nodes.items() for d in node.deps)

    def edge_map(self) -> dict:
        """Mutable copy {target: set(deps)} for callers that build a new graph."""
        return {t: set(node.deps) for t, node in self.nodes.items()}

    def same_structure(self, other: "DependencyGraph") -> bool:
        """Equality of kind, node set and edges; provenance and commit fields are ignored."""
        return self.kind == other.kind and self.edge_map() == other.edge_map()

    def with_root_commit(self, commit: str) -> "DependencyGraph":
        return DependencyGraph(self.nodes, self.kind, commit)


def _check_acyclic(nodes: Mapping[str, TargetNode]) -> None:
    digraph = nx.DiGraph()
    digraph.add_edges_from((t, d) for t, node in nodes.items() for d in node.deps)
    if not nx.is_directed_acyclic_graph(digraph):
        cycle = [u for u, _ in nx.find_cycle(digraph)]
        raise CycleError("dependency cycle: " + " -> ".join(cycle + cycle[:1]), cycle)


@dataclass(frozen=True)
class GraphDelta:
    added_edges: frozenset = frozenset()
    removed_edges: frozenset = frozenset()
    added_nodes: frozenset = frozenset()
    removed_nodes: frozenset = frozenset()

    def __post_init__(self):
        for name in ("added_edges", "removed_edges", "added_nodes", "removed_nodes"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.added_edges & self.removed_edges:
            raise ValueError(f"edges both added and removed: {sorted(self.added_edges & self.removed_edges)}")
        if self.added_nodes & self.removed_nodes:
            raise ValueError(f"nodes both added and removed: {sorted(self.added_nodes & self.removed_nodes)}")

    @property
    def is_empty(self) -> bool:
        return not (self.added_edges or self.removed_edges or self.added_nodes or self.removed_nodes)

    def touched_targets(self) -> frozenset:
        return (frozenset(t for t, _ in self.added_edges | self.removed_edges)
                | self.added_nodes | self.removed_nodes)

    def restricted(self, excluded_targets: Iterable[str]) -> "GraphDelta":
        """The same delta without any change whose target is in `excluded_targets`."""
        excluded = frozenset(excluded_targets)
        return GraphDelta(
            added_edges={e for e in self.added_edges if e[0] not in excluded},
            removed_edges={e for e in self.removed_edges if e[0] not in excluded},
            added_nodes=self.added_nodes - excluded,
            removed_nodes=self.removed_nodes - excluded,
        )


# ====================================================================================================
# CONSTRUCTION HELPERS
# ====================================================================================================

def empty_graph(kind: GraphKind, root_commit: str = "") -> DependencyGraph:
    return DependencyGraph({}, kind, root_commit)


def graph_from_edge_map(edge_map: Mapping[str, Iterable[str]], kind: GraphKind, root_commit: str = "",
                        provenance: Provenance = Provenance.INFERRED, commit: str = "",
                        order_only: Optional[Mapping[str, Iterable[str]]] = None) -> DependencyGraph:
    """Build a graph whose every node carries the same provenance and commit."""
    order_only = order_only or {}
    nodes = {
        target: TargetNode(target, frozenset(deps), provenance, commit, frozenset(order_only.get(target, ())))
        for target, deps in edge_map.items()
    }
    return DependencyGraph(nodes, kind, root_commit)


def exclude_paths(graph: DependencyGraph, globs: Sequence[str]) -> DependencyGraph:
    """Drop nodes and edges whose path matches one of the fnmatch `globs`."""
    if not globs:
        return graph
    nodes = {}
    for target, node in graph.nodes.items():
        if matches_any(target, globs):
            continue
        nodes[target] = replace(node, deps=frozenset(d for d in node.deps if not matches_any(d, globs)))
    return DependencyGraph(nodes, graph.kind, graph.root_commit)


# ====================================================================================================
# OPERATIONS
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# apply_delta()
# ----------------------------------------------------------------------------------------------------
def apply_delta(graph: DependencyGraph, delta: GraphDelta, commit: str,
                warnings: Optional[list] = None) -> DependencyGraph:
    """
    Apply a GraphDelta and return the resulting graph.

    Steps performed:
        1. Removes removed_edges (an absent edge is a warning, never an error).
        2. Drops every node in removed_nodes together with any edges it still has.
        3. Creates added_nodes and adds added_edges (creating target nodes as needed).
        4. Marks every touched node Inferred at `commit`; untouched nodes keep their fields.

    Args:
        graph (DependencyGraph): The graph to start from (not modified).
        delta (GraphDelta): Edge and node changes; must reference project paths only.
        commit (str): Commit identifier recorded on touched nodes.
        warnings (list, optional): Receives one message per absent removed edge.

    Returns:
        DependencyGraph: New graph of the same kind and root commit.

    Raises:
        CycleError: If the added edges close a cycle.

    Example:
        >>> g = graph_from_edge_map({"a.o": {"a.c", "b.h"}}, GraphKind.ACTUAL)
        >>> d = GraphDelta(added_edges={("a.o", "d.h")}, removed_edges={("a.o", "b.h")})
        >>> sorted(apply_delta(g, d, "c1").deps_of("a.o"))
        ['a.c', 'd.h']
    """
    if delta.is_empty:
        return graph

    edge_map = graph.edge_map()
    touched = set()

    for target, dep in sorted(delta.removed_edges):
        deps = edge_map.get(target)
        if deps is None or dep not in deps:
            message = f"removed edge {target} -> {dep} is not in the graph"
            logger.warning("⚠️ %s", message)
            if warnings is not None:
                warnings.append(message)
            continue
        deps.discard(dep)
        touched.add(target)

    for target in delta.removed_nodes:
        edge_map.pop(target, None)
        touched.discard(target)

    for target in delta.added_nodes:
        edge_map.setdefault(target, set())
        touched.add(target)

    for target, dep in delta.added_edges:
        edge_map.setdefault(target, set()).add(dep)
        touched.add(target)

    nodes = {}
    for target, deps in edge_map.items():
        old = graph.nodes.get(target)
        if target in touched or old is None:
            order_only = old.order_only if old is not None else frozenset()
            nodes[target] = TargetNode(target, frozenset(deps), Provenance.INFERRED, commit, order_only)
        else:
            nodes[target] = old
    return DependencyGraph(nodes, graph.kind, graph.root_commit)


# ----------------------------------------------------------------------------------------------------
# diff_graphs()
# ----------------------------------------------------------------------------------------------------
def diff_graphs(before: DependencyGraph, after: DependencyGraph) -> GraphDelta:
    """
    Compute the delta that turns `before` into `after` (round-trip law:
    apply_delta(before, diff_graphs(before, after)) has the same structure as `after`).
    """
    if before.kind != after.kind:
        raise ValueError(f"cannot diff a {before.kind.value} graph against a {after.kind.value} graph")

    before_edges = before.edges()
    after_edges = after.edges()
    return GraphDelta(
        added_edges=after_edges - before_edges,
        removed_edges=before_edges - after_edges,
        added_nodes=after.targets - before.targets,
        removed_nodes=before.targets - after.targets,
    )


# ====================================================================================================
# PERSISTENCE
# ====================================================================================================

def _node_record(node: TargetNode) -> str:
    record = {
        "target": node.target,
        "deps": sorted(node.deps),
        "provenance": node.provenance.value,
        "commit": node.last_updated_commit,
    }
    if node.order_only:
        record["order_only"] = sorted(node.order_only)
    return json.dumps(record, ensure_ascii=False)


def dump_graph(graph: DependencyGraph) -> str:
    """Serialize a graph to the versioned line-oriented text format."""
    lines = [f"#depsentry-graph v{GRAPH_FORMAT_VERSION} kind={graph.kind.value} root_commit={graph.root_commit}"]
    lines.extend(_node_record(graph.nodes[target]) for target in sorted(graph.nodes))
    return "\n".join(lines) + "\n"


def parse_graph(text: str, source: str = "<graph>") -> DependencyGraph:
    """Inverse of dump_graph. Any inconsistency raises StateCorrupt."""
    lines = text.splitlines()
    if not lines:
        raise StateCorrupt(f"{source}: empty graph file")
    header = _GRAPH_HEADER_RE.match(lines[0])
    if header is None:
        raise StateCorrupt(f"{source}: bad header {lines[0]!r}")
    if int(header["version"]) != GRAPH_FORMAT_VERSION:
        raise StateCorrupt(f"{source}: unsupported format version {header['version']}")
    try:
        kind = GraphKind(header["kind"])
        nodes = {}
        for number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            record = json.loads(line)
            node = TargetNode(
                target=record["target"],
                deps=frozenset(record["deps"]),
                provenance=Provenance(record["provenance"]),
                last_updated_commit=record.get("commit", ""),
                order_only=frozenset(record.get("order_only", ())),
            )
            if node.target in nodes:
                raise StateCorrupt(f"{source}:{number}: duplicate node {node.target}")
            nodes[node.target] = node
        return DependencyGraph(nodes, kind, header["commit"])
    except StateCorrupt:
        raise
    except (ValueError, KeyError, TypeError, CycleError) as exc:
        raise StateCorrupt(f"{source}: {exc}") from exc


# ----------------------------------------------------------------------------------------------------
# save() / load()
# ----------------------------------------------------------------------------------------------------
def save(graph: DependencyGraph, store) -> Path:
    """
    Persist the graph to <store>/actual-graph.v1 (atomic replace; the last save wins).

    Returns:
        Path: The written file.
    """
    paths = store_paths(store)
    paths.root.mkdir(parents=True, exist_ok=True)
    atomic_write_text(paths.actual_graph, dump_graph(graph))
    logger.debug("saved %d nodes to %s", len(graph), paths.actual_graph)
    return paths.actual_graph


def load(store) -> DependencyGraph:
    """
    Load the graph saved in <store>/actual-graph.v1.

    Raises:
        StateMissing: No graph has been saved in this store.
        StateCorrupt: The file exists but does not parse.
    """
    path = store_paths(store).actual_graph
    if not path.is_file():
        raise StateMissing(f"no saved graph in {path.parent}")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise StateCorrupt(f"{path}: {exc}") from exc
    return parse_graph(text, str(path))


# ----------------------------------------------------------------------------------------------------
# save_meta() / load_meta() / snapshot_dir()
# ----------------------------------------------------------------------------------------------------
def save_meta(store, project_root, root_commit: str, snapshot: str = "") -> None:
    paths = store_paths(store)
    paths.root.mkdir(parents=True, exist_ok=True)
    text = (f"project_root={project_root}\n"
            f"root_commit={root_commit}\n"
            f"tool_version={TOOL_VERSION}\n")
    if snapshot:
        text += f"snapshot={snapshot}\n"
    atomic_write_text(paths.meta, text)


def load_meta(store) -> dict:
    path = store_paths(store).meta
    if not path.is_file():
        raise StateMissing(f"no metadata in {path.parent}")
    meta = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise StateCorrupt(f"{path}:{number}: expected key=value")
        meta[key.strip()] = value.strip()
    for key in ("project_root", "root_commit"):
        if key not in meta:
            raise StateCorrupt(f"{path}: missing {key}")
    return meta


def snapshot_dir(store, meta: Mapping[str, str]) -> Path:
    """
    Directory holding the graph, recipes and report that `meta` points at.

    Stores written without a `snapshot` key keep those files in the store directory itself.

    Raises:
        StateCorrupt: meta names a snapshot directory that does not exist.
    """
    root = store_paths(store).root
    name = meta.get("snapshot", "")
    if not name:
        return root
    path = root / name
    if path.parent != root or not path.is_dir():
        raise StateCorrupt(f"{store_paths(store).meta}: snapshot {name!r} is missing")
    return path
