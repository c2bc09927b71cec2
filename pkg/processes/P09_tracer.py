# ====================================================================================================
# P09_tracer.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Turns a monitored build into a per-target actual dependency graph. Each build sub-process's
#   file operations are classified into inputs and outputs; every recipe's outputs become target
#   nodes whose dependencies are the recipe's inputs.
# ----------------------------------------------------------------------------------------------------
# Pieces:
#   • TraceEvent / BuildTrace          → the event model and the on-disk trace codec.
#   • classify_process(events, root)   → ProcessFileSummary for one pid.
#   • build_actual_graph(trace)        → Actual DependencyGraph.
#   • StraceLogParser                  → strace -f -y log → TraceEvent list.
#   • LiveStraceProvider               → runs make under strace.
#   • ReplayProvider                   → reads recorded traces from a replay directory.
#   • run_traced_build(...)            → provider dispatch + trace persistence.
# ----------------------------------------------------------------------------------------------------
# Trace file format:
#   #depsentry-trace v1 root=<abs path>
#   seq<TAB>pid<TAB>ppid<TAB>op<TAB>path[<TAB>path2]
#   op ∈ R W C D N X S E. Rename carries both paths, Exec the command, Exit the status,
#   Spawn no path (its pid is the child). TAB, LF, CR and backslash are escaped.
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
from processes.P02_system_processes import ReplayDir, live_tracing_supported, run_command
from processes.P03_shared_functions import (
    atomic_write_text, escape_field, is_project_path, normalize_path, unescape_field,
)
from processes.P04_static_lists import (
    BuildKind, GraphKind, MAKE_EXECUTABLES, PATH_OPS, Provenance, STRACE_SYSCALLS, TraceOp,
)
from processes.P05_exceptions import (
    BuildFailed, InvalidPath, ParseError, TargetBuildFailed, TracerUnavailable,
)
from processes.P06_depgraph import DependencyGraph, TargetNode, empty_graph

logger = logging.getLogger(__name__)

TRACE_FORMAT_VERSION = 1
_TRACE_HEADER_RE = re.compile(r"^#depsentry-trace v(?P<version>\d+) root=(?P<root>.+)$")


# ====================================================================================================
# EVENT MODEL
# ====================================================================================================

@dataclass(frozen=True)
class TraceEvent:
    seq: int
    pid: int
    ppid: int
    op: TraceOp
    path: str = ""
    path2: str = ""


@dataclass(frozen=True)
class BuildTrace:
    """Ordered file-operation events of one build, attributed to processes."""
    events: tuple
    project_root: str
    build_kind: BuildKind = BuildKind.CLEAN
    target: str = ""

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        for prev, cur in zip(events, events[1:]):
            if cur.seq <= prev.seq:
                raise ValueError(f"trace seq not increasing at {cur.seq} (after {prev.seq})")

    @property
    def root_pid(self) -> Optional[int]:
        return self.events[0].pid if self.events else None

    def root_exit_status(self) -> Optional[int]:
        root = self.root_pid
        for event in reversed(self.events):
            if event.pid == root and event.op is TraceOp.EXIT:
                return int(event.path or 0)
        return None


@dataclass(frozen=True)
class ProcessFileSummary:
    pid: int
    inputs: frozenset = frozenset()
    outputs: frozenset = frozenset()
    command: str = ""
    # path -> seq of the last write/create/rename-into, and of the last delete/rename-away
    last_write: Mapping = field(default_factory=dict)
    last_removal: Mapping = field(default_factory=dict)
    externals: int = 0
    skipped: int = 0


# ====================================================================================================
# TRACE CODEC
# ====================================================================================================

def _event_line(event: TraceEvent) -> str:
    cols = [str(event.seq), str(event.pid), str(event.ppid), event.op.value]
    if event.op is not TraceOp.SPAWN:
        cols.append(escape_field(event.path))
    if event.op is TraceOp.RENAME:
        cols.append(escape_field(event.path2))
    return "\t".join(cols)


def dump_trace(trace: BuildTrace) -> str:
    lines = [f"#depsentry-trace v{TRACE_FORMAT_VERSION} root={trace.project_root}"]
    lines.extend(_event_line(event) for event in trace.events)
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------------------------------
# parse_trace()
# ----------------------------------------------------------------------------------------------------
def parse_trace(text: str, build_kind: BuildKind = BuildKind.CLEAN, target: str = "") -> BuildTrace:
    """
    Parse the line-delimited trace format.

    Raises:
        ParseError: Bad header, unknown op letter, missing path column, non-increasing seq,
                    or a pid with events that is neither spawned nor the root pid.
    """
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty trace", 1)
    header = _TRACE_HEADER_RE.match(lines[0])
    if header is None:
        raise ParseError(f"bad trace header {lines[0]!r}", 1)
    if int(header["version"]) != TRACE_FORMAT_VERSION:
        raise ParseError(f"unsupported trace version {header['version']}", 1)

    events = []
    spawned = set()
    root_pid = None
    last_seq = None
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) < 4:
            raise ParseError(f"expected at least 4 columns, got {len(cols)}", number)
        try:
            seq, pid, ppid = int(cols[0]), int(cols[1]), int(cols[2])
            op = TraceOp(cols[3])
        except ValueError as exc:
            raise ParseError(str(exc), number) from exc
        if last_seq is not None and seq <= last_seq:
            raise ParseError(f"seq {seq} does not increase", number)
        last_seq = seq

        path = unescape_field(cols[4]) if len(cols) > 4 else ""
        path2 = unescape_field(cols[5]) if len(cols) > 5 else ""
        if op in PATH_OPS and not path:
            raise ParseError(f"{op.name} event without a path", number)
        if op is TraceOp.RENAME and not path2:
            raise ParseError("rename event without a new path", number)

        if root_pid is None:
            root_pid = pid
        if op is TraceOp.SPAWN:
            spawned.add(pid)
        elif pid != root_pid and pid not in spawned:
            raise ParseError(f"pid {pid} has events but was never spawned", number)
        events.append(TraceEvent(seq, pid, ppid, op, path, path2))
    return BuildTrace(tuple(events), header["root"], build_kind, target)


# ====================================================================================================
# CLASSIFICATION
# ====================================================================================================

# ----------------------------------------------------------------------------------------------------
# classify_process()
# ----------------------------------------------------------------------------------------------------
def classify_process(events: Sequence[TraceEvent], project_root: str) -> ProcessFileSummary:
    """
    Classify one process's file operations into inputs and outputs.

    Rules:
        • First project-relative op decides: Read → input, Write/Create → output.
        • Read after the process's own Write/Create is ignored.
        • Write/Create after an initial Read keeps the path an input.
        • Delete forgets an output (a later Create makes it an output again); otherwise no-op.
        • Rename moves the classification from old to new; an unseen old path makes new an output.
        • External paths are dropped; malformed paths are skipped and counted.

    Args:
        events (Sequence[TraceEvent]): Events of a single pid in seq order.
        project_root (str): Absolute project root used to normalize paths.

    Returns:
        ProcessFileSummary: Disjoint inputs/outputs plus the last exec'd command.

    Example:
        >>> evs = [TraceEvent(1, 174, 1, TraceOp.READ, "/Example-master/src/fzy.c"),
        ...        TraceEvent(2, 174, 1, TraceOp.WRITE, "/Example-master/src/fzy.o")]
        >>> s = classify_process(evs, "/Example-master")
        >>> sorted(s.inputs), sorted(s.outputs)
        (['src/fzy.c'], ['src/fzy.o'])
    """
    pids = {event.pid for event in events}
    if len(pids) > 1:
        raise ValueError(f"classify_process expects one pid, got {sorted(pids)}")

    state = {}
    last_write = {}
    last_removal = {}
    command = ""
    externals = 0
    skipped = 0

    def project(raw: str):
        nonlocal externals, skipped
        try:
            value = normalize_path(raw, project_root)
        except InvalidPath:
            skipped += 1
            return None
        if not is_project_path(value):
            externals += 1
            return None
        return value

    def produce(path: str, seq: int) -> None:
        if path not in state:
            state[path] = "out"
        if state[path] == "out":
            last_write[path] = seq

    def remove(path: str, seq: int) -> None:
        if state.get(path) == "out":
            del state[path]
        last_removal[path] = seq

    for event in events:
        op = event.op
        if op is TraceOp.EXEC:
            command = event.path
        elif op is TraceOp.READ:
            path = project(event.path)
            if path is not None:
                state.setdefault(path, "in")
        elif op in (TraceOp.WRITE, TraceOp.CREATE):
            path = project(event.path)
            if path is not None:
                produce(path, event.seq)
        elif op is TraceOp.DELETE:
            path = project(event.path)
            if path is not None:
                remove(path, event.seq)
        elif op is TraceOp.RENAME:
            old, new = project(event.path), project(event.path2)
            moved = state.get(old, "out") if old is not None else "out"
            if old is not None:
                state.pop(old, None)
                last_removal[old] = event.seq
            if new is not None:
                state[new] = moved
                if moved == "out":
                    last_write[new] = event.seq

    if skipped:
        logger.debug("pid %s: skipped %d unclassifiable paths", events[0].pid if events else "?", skipped)
    return ProcessFileSummary(
        pid=events[0].pid if events else 0,
        inputs=frozenset(p for p, s in state.items() if s == "in"),
        outputs=frozenset(p for p, s in state.items() if s == "out"),
        command=command,
        last_write=dict(last_write),
        last_removal=dict(last_removal),
        externals=externals,
        skipped=skipped,
    )


# ----------------------------------------------------------------------------------------------------
# Recipe attribution
# ----------------------------------------------------------------------------------------------------
@dataclass
class RecipeUnit:
    """Every process under one child of a make process: one recipe execution."""
    root_pid: int
    inputs: set = field(default_factory=set)
    outputs: set = field(default_factory=set)
    commands: list = field(default_factory=list)
    last_write: dict = field(default_factory=dict)
    last_removal: dict = field(default_factory=dict)


def _is_make_command(command: str) -> bool:
    try:
        words = shlex.split(command)
    except ValueError:
        words = command.split()
    return bool(words) and posixpath.basename(words[0]) in MAKE_EXECUTABLES


def recipe_units(trace: BuildTrace) -> list:
    """
    Group the trace into recipe units and pool their file summaries.

    A unit is rooted at a process whose parent is a make process (the trace's root pid, or
    any process that exec'd make). Every output of a unit shares the unit's pooled inputs;
    inputs produced inside the same unit (temporaries, renamed objects) are dropped.
    """
    by_pid = defaultdict(list)
    parent = {}
    make_pids = set()
    for event in trace.events:
        if event.op is TraceOp.SPAWN:
            parent[event.pid] = event.ppid
            continue
        by_pid[event.pid].append(event)
        if event.op is TraceOp.EXEC and _is_make_command(event.path):
            make_pids.add(event.pid)
    make_pids.update(pid for pid in by_pid if pid not in parent)

    unit_of = {}

    def find_unit(pid: int) -> Optional[int]:
        chain = []
        cur = pid
        result = None
        while cur is not None:
            if cur in unit_of:
                result = unit_of[cur]
                break
            if cur in make_pids:
                break
            chain.append(cur)
            up = parent.get(cur)
            if up in make_pids:
                result = cur
                break
            cur = up
        for seen in chain:
            unit_of[seen] = result
        return result

    units = {}
    for pid in sorted(by_pid):
        root = find_unit(pid)
        if root is None:
            continue
        summary = classify_process(by_pid[pid], trace.project_root)
        unit = units.setdefault(root, RecipeUnit(root))
        unit.inputs |= summary.inputs
        unit.outputs |= summary.outputs
        if summary.command:
            unit.commands.append(summary.command)
        for path, seq in summary.last_write.items():
            unit.last_write[path] = max(seq, unit.last_write.get(path, -1))
        for path, seq in summary.last_removal.items():
            unit.last_removal[path] = max(seq, unit.last_removal.get(path, -1))

    for unit in units.values():
        produced = set(unit.outputs) | set(unit.last_write)
        unit.outputs = {p for p in unit.outputs
                        if unit.last_write.get(p, -1) > unit.last_removal.get(p, -1)}
        unit.inputs -= produced
    return [units[root] for root in sorted(units)]


def multi_output_recipes(trace: BuildTrace) -> list:
    """Sorted output tuples of every recipe unit that produced more than one file."""
    return sorted(tuple(sorted(unit.outputs)) for unit in recipe_units(trace) if len(unit.outputs) > 1)


# ----------------------------------------------------------------------------------------------------
# build_actual_graph()
# ----------------------------------------------------------------------------------------------------
def build_actual_graph(trace: BuildTrace, commit: str = "", warnings: Optional[list] = None) -> DependencyGraph:
    """
    Build the Actual dependency graph of a trace.

    Steps performed:
        1. Splits the trace into recipe units (see recipe_units).
        2. Makes every unit output a target whose deps are the unit's inputs.
        3. Unions inputs when several units write the same target; a unit whose output was
           later deleted by another writer loses (last writer wins, with a warning).
        4. Drops targets deleted after their last write.

    Args:
        trace (BuildTrace): The build's events.
        commit (str): Commit recorded on every node.
        warnings (list, optional): Receives last-writer-wins messages.

    Returns:
        DependencyGraph: Actual graph; provenance CleanTrace for clean builds, else IncrementalTrace.
    """
    if not trace.events:
        return empty_graph(GraphKind.ACTUAL)

    provenance = Provenance.CLEAN_TRACE if trace.build_kind is BuildKind.CLEAN else Provenance.INCREMENTAL_TRACE
    units = recipe_units(trace)

    writers = defaultdict(list)
    final_removal = {}
    for unit in units:
        for path in unit.outputs:
            writers[path].append(unit)
        for path, seq in unit.last_removal.items():
            final_removal[path] = max(seq, final_removal.get(path, -1))

    nodes = {}
    for target in sorted(writers):
        contributions = sorted(writers[target], key=lambda u: u.last_write[target])
        kept = []
        for index, unit in enumerate(contributions):
            write_seq = unit.last_write[target]
            if any(later.last_removal.get(target, -1) > write_seq for later in contributions[index + 1:]):
                message = f"{target} deleted and re-created by another recipe; keeping the last writer"
                logger.warning("⚠️ %s", message)
                if warnings is not None:
                    warnings.append(message)
                continue
            kept.append(unit)
        if final_removal.get(target, -1) > max(u.last_write[target] for u in contributions):
            logger.debug("%s removed after its last write; no node", target)
            continue
        deps = set().union(*(unit.inputs for unit in kept)) - {target}
        nodes[target] = TargetNode(target, frozenset(deps), provenance, commit)
    return DependencyGraph(nodes, GraphKind.ACTUAL)


# ====================================================================================================
# LIVE TRACING (strace)
# ====================================================================================================

def _split_args(text: str) -> list:
    """Split a strace argument list on top-level commas (quotes and brackets respected)."""
    parts, buf = [], []
    depth = 0
    quoted = escaped = False
    for ch in text:
        if quoted:
            buf.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                quoted = False
            continue
        if ch == '"':
            quoted = True
        elif ch in "[{(<":
            depth += 1
        elif ch in "]})>":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append("".join(buf).strip())
            buf = []
            continue
        buf.append(ch)
    if buf or parts:
        parts.append("".join(buf).strip())
    return parts


def _decode_string(token: str) -> Optional[str]:
    """strace's C-escaped "..." literal → str (None for non-string tokens)."""
    token = token.strip()
    if token.endswith("..."):
        token = token[:-3]
    if len(token) < 2 or not (token.startswith('"') and token.endswith('"')):
        return None
    try:
        raw = ast.literal_eval("b" + token)
    except (ValueError, SyntaxError):
        return None
    return raw.decode("utf-8", errors="replace")


_FD_RE = re.compile(r"^(?P<fd>-?\w+)(?:<(?P<path>.*)>)?$")


class StraceLogParser:
    """
    Converts the output of `strace -f -q -y -o <file> make ...` into TraceEvents.

    Handled calls: execve, clone/clone3/fork/vfork, open/openat/creat, rename*, unlink*,
    symlink*, link*, chdir/fchdir and process exits. Relative paths are resolved against a
    per-pid working directory (children inherit it at clone time) or the dirfd decoration.
    """

    _PID_RE = re.compile(r"^(?P<pid>\d+)\s+(?P<rest>.*)$")
    _UNFINISHED_RE = re.compile(r"^(?P<head>.*?)\s*<unfinished \.\.\.>$")
    _RESUMED_RE = re.compile(r"^<\.\.\. (?P<name>\w+) resumed>\s*(?P<tail>.*)$")
    _CALL_RE = re.compile(
        r"^(?P<name>\w+)\((?P<args>.*)\)\s+=\s+(?P<ret>-?\d+|\?|0x[0-9a-fA-F]+)(?:<(?P<retpath>.*?)>)?(?:\s+.*)?$"
    )
    _EXITED_RE = re.compile(r"^\+\+\+ exited with (?P<status>-?\d+) \+\+\+$")
    _KILLED_RE = re.compile(r"^\+\+\+ killed by (?P<signal>\w+)")

    def __init__(self, project_root: str):
        self.project_root = str(project_root)
        self._handlers = {
            "execve": self._handle_exec,
            "clone": self._handle_clone, "clone3": self._handle_clone,
            "fork": self._handle_clone, "vfork": self._handle_clone,
            "open": self._handle_open, "openat": self._handle_open, "creat": self._handle_open,
            "rename": self._handle_rename, "renameat": self._handle_rename, "renameat2": self._handle_rename,
            "unlink": self._handle_unlink, "unlinkat": self._handle_unlink,
            "symlink": self._handle_symlink, "symlinkat": self._handle_symlink,
            "link": self._handle_link, "linkat": self._handle_link,
            "chdir": self._handle_chdir, "fchdir": self._handle_chdir,
        }

    # ------------------------------------------------------------------------------------------------
    # Pass 1: raw records (unfinished/resumed calls joined)
    # ------------------------------------------------------------------------------------------------
    def _records(self, lines: Iterable[str]) -> list:
        pending = {}
        records = []
        for line in lines:
            line = line.rstrip("\n")
            match = self._PID_RE.match(line)
            if match is None:
                continue
            pid, rest = int(match["pid"]), match["rest"]

            unfinished = self._UNFINISHED_RE.match(rest)
            if unfinished:
                pending[pid] = unfinished["head"]
                continue
            resumed = self._RESUMED_RE.match(rest)
            if resumed:
                head = pending.pop(pid, None)
                if head is None:
                    continue
                rest = head + resumed["tail"]

            exited = self._EXITED_RE.match(rest)
            if exited:
                records.append((pid, "exit", int(exited["status"]), None, None))
                continue
            if self._KILLED_RE.match(rest):
                records.append((pid, "exit", -1, None, None))
                continue
            call = self._CALL_RE.match(rest)
            if call is None or call["name"] not in self._handlers:
                continue
            ret = call["ret"]
            ret_value = int(ret, 0) if ret not in ("?",) else None
            records.append((pid, call["name"], ret_value, _split_args(call["args"]), call["retpath"]))
        return records

    # ------------------------------------------------------------------------------------------------
    # Pass 2: events
    # ------------------------------------------------------------------------------------------------
    def parse(self, lines: Iterable[str]) -> list:
        records = self._records(lines)
        self._parent = {}
        for pid, name, ret, _args, _ in records:
            if name in ("clone", "clone3", "fork", "vfork") and ret is not None and ret > 0:
                self._parent.setdefault(ret, pid)

        self._cwd = {}
        self._events = []
        self._announced = set()
        self._root = records[0][0] if records else None
        for pid, name, ret, args, retpath in records:
            self._announce(pid)
            if name == "exit":
                self._emit(pid, TraceOp.EXIT, str(ret))
                continue
            if ret is None or ret < 0:
                continue
            try:
                self._handlers[name](pid, name, ret, args, retpath)
            except (IndexError, TypeError):
                logger.debug("unparsed %s call in pid %d: %r", name, pid, args)
        return self._events

    def _announce(self, pid: int) -> None:
        if pid in self._announced:
            return
        self._announced.add(pid)
        if pid != self._root:
            parent = self._parent.get(pid, self._root)
            self._announce(parent)
            self._emit(pid, TraceOp.SPAWN, ppid=parent)

    def _emit(self, pid: int, op: TraceOp, path: str = "", path2: str = "", ppid: Optional[int] = None) -> None:
        seq = len(self._events) + 1
        if ppid is None:
            ppid = self._parent.get(pid, self._root if pid != self._root else 0)
        self._events.append(TraceEvent(seq, pid, ppid, op, path, path2))

    def _cwd_of(self, pid: int) -> str:
        cur = pid
        while cur is not None:
            if cur in self._cwd:
                return self._cwd[cur]
            cur = self._parent.get(cur)
        return self.project_root

    def _resolve(self, pid: int, raw: str, dir_token: Optional[str] = None) -> str:
        if raw.startswith("/"):
            return raw
        base = None
        if dir_token:
            match = _FD_RE.match(dir_token)
            if match and match["path"]:
                base = match["path"]
        return posixpath.join(base or self._cwd_of(pid), raw)

    # ------------------------------------------------------------------------------------------------
    # Handlers
    # ------------------------------------------------------------------------------------------------
    def _handle_exec(self, pid, name, ret, args, retpath):
        program = _decode_string(args[0])
        argv = [_decode_string(token) for token in _split_args(args[1].strip()[1:-1])]
        argv = [word for word in argv if word is not None]
        if program:
            self._emit(pid, TraceOp.READ, self._resolve(pid, program))
        self._emit(pid, TraceOp.EXEC, shlex.join(argv) if argv else (program or ""))

    def _handle_clone(self, pid, name, ret, args, retpath):
        self._cwd.setdefault(ret, self._cwd_of(pid))
        self._announce(ret)

    def _handle_open(self, pid, name, ret, args, retpath):
        if name == "openat":
            dir_token, raw, flags = args[0], _decode_string(args[1]), args[2]
        elif name == "creat":
            dir_token, raw, flags = None, _decode_string(args[0]), "O_CREAT|O_WRONLY|O_TRUNC"
        else:
            dir_token, raw, flags = None, _decode_string(args[0]), args[1]
        if raw is None or "O_DIRECTORY" in flags:
            return
        path = self._resolve(pid, raw, dir_token)
        if "O_CREAT" in flags:
            op = TraceOp.CREATE
        elif "O_WRONLY" in flags or "O_RDWR" in flags:
            op = TraceOp.WRITE
        else:
            op = TraceOp.READ
        self._emit(pid, op, path)

    def _handle_rename(self, pid, name, ret, args, retpath):
        if name == "rename":
            old = self._resolve(pid, _decode_string(args[0]))
            new = self._resolve(pid, _decode_string(args[1]))
        else:
            old = self._resolve(pid, _decode_string(args[1]), args[0])
            new = self._resolve(pid, _decode_string(args[3]), args[2])
        self._emit(pid, TraceOp.RENAME, old, new)

    def _handle_unlink(self, pid, name, ret, args, retpath):
        if name == "unlinkat":
            if len(args) > 2 and "AT_REMOVEDIR" in args[2]:
                return
            path = self._resolve(pid, _decode_string(args[1]), args[0])
        else:
            path = self._resolve(pid, _decode_string(args[0]))
        self._emit(pid, TraceOp.DELETE, path)

    def _handle_symlink(self, pid, name, ret, args, retpath):
        target = _decode_string(args[0])
        if name == "symlinkat":
            link = self._resolve(pid, _decode_string(args[2]), args[1])
        else:
            link = self._resolve(pid, _decode_string(args[1]))
        # A relative link target is relative to the link's directory.
        target_path = target if target.startswith("/") else posixpath.join(posixpath.dirname(link), target)
        self._emit(pid, TraceOp.READ, target_path)
        self._emit(pid, TraceOp.CREATE, link)

    def _handle_link(self, pid, name, ret, args, retpath):
        if name == "linkat":
            old = self._resolve(pid, _decode_string(args[1]), args[0])
            new = self._resolve(pid, _decode_string(args[3]), args[2])
        else:
            old = self._resolve(pid, _decode_string(args[0]))
            new = self._resolve(pid, _decode_string(args[1]))
        self._emit(pid, TraceOp.READ, old)
        self._emit(pid, TraceOp.CREATE, new)

    def _handle_chdir(self, pid, name, ret, args, retpath):
        if name == "fchdir":
            match = _FD_RE.match(args[0])
            if match and match["path"]:
                self._cwd[pid] = match["path"]
        else:
            self._cwd[pid] = posixpath.normpath(self._resolve(pid, _decode_string(args[0])))


# ====================================================================================================
# PROVIDERS
# ====================================================================================================

class TraceProvider(Protocol):
    def trace_build(self, build_kind: BuildKind, target: str = "") -> BuildTrace: ...


def make_arguments(build_kind: BuildKind, make_args: Sequence[str], target: str = "") -> list:
    """make command line for a traced build: clean → -B, incremental → plain, target → -B <target>."""
    args = ["make"]
    if build_kind is not BuildKind.INCREMENTAL:
        args.append("-B")
    args.extend(make_args)
    if build_kind is BuildKind.SINGLE_TARGET:
        args.append(target)
    return args


class LiveStraceProvider:
    """Runs make under `strace -f` from the project root."""

    def __init__(self, project_root, make_args: Sequence[str] = ()):
        self.project_root = str(Path(project_root).absolute())
        self.make_args = list(make_args)

    def trace_build(self, build_kind: BuildKind, target: str = "") -> BuildTrace:
        if not live_tracing_supported():
            raise TracerUnavailable("live tracing needs Linux and strace on PATH; use --replay <dir>")

        with tempfile.TemporaryDirectory(prefix="depsentry-strace-") as tmp:
            log_path = Path(tmp) / "strace.log"
            syscalls = ",".join("?" + name for name in STRACE_SYSCALLS)
            args = ["strace", "-f", "-q", "-y", "-s", "4096", "-e", f"trace={syscalls}",
                    "-o", str(log_path), *make_arguments(build_kind, self.make_args, target)]
            logger.info("⏳ Tracing %s build: %s", build_kind.value, shlex.join(args[args.index("make"):]))
            result = run_command(args, cwd=self.project_root)
            if not result.ok:
                if build_kind is BuildKind.SINGLE_TARGET:
                    raise TargetBuildFailed(target, result.returncode, result.stderr_tail(5))
                raise BuildFailed(result.returncode, result.stderr_tail())
            with log_path.open(encoding="utf-8", errors="replace") as handle:
                events = StraceLogParser(self.project_root).parse(handle)
        logger.info("✅ Traced %d events", len(events))
        return BuildTrace(tuple(events), self.project_root, build_kind, target)


class ReplayProvider:
    """Reads recorded traces for one commit from a replay directory."""

    def __init__(self, replay: ReplayDir, commit: str = ""):
        self.replay = replay
        self.commit = commit

    def trace_build(self, build_kind: BuildKind, target: str = "") -> BuildTrace:
        if build_kind is BuildKind.SINGLE_TARGET:
            path = self.replay.target_trace(self.commit, target)
            if path is None:
                raise TargetBuildFailed(target, detail="no recorded trace in replay directory")
        else:
            name = ReplayDir.CLEAN_TRACE if build_kind is BuildKind.CLEAN else ReplayDir.INCREMENTAL_TRACE
            path = self.replay.locate(self.commit, name)
            if path is None:
                raise TracerUnavailable(f"no recorded {name} for commit {self.commit or '<none>'} in {self.replay.root}")

        trace = parse_trace(path.read_text(encoding="utf-8"), build_kind, target)
        status = trace.root_exit_status()
        if status:
            if build_kind is BuildKind.SINGLE_TARGET:
                raise TargetBuildFailed(target, status)
            raise BuildFailed(status, f"recorded build in {path} exited with {status}")
        logger.debug("replayed %s (%d events)", path, len(trace.events))
        return trace


# ----------------------------------------------------------------------------------------------------
# run_traced_build()
# ----------------------------------------------------------------------------------------------------
def trace_file_name(commit: str, build_kind: BuildKind, target: str = "") -> str:
    name = f"{commit or 'worktree'}-{build_kind.value}"
    if target:
        name += "-" + ReplayDir.target_file_name(target)[: -len(".trace")]
    return name + ".trace"


def run_traced_build(project_root, make_args: Sequence[str], build_kind: BuildKind, target: str = "", *,
                     provider: Optional[TraceProvider] = None, store=None, commit: str = "") -> BuildTrace:
    """
    Run (or replay) one traced build and persist its trace.

    Args:
        project_root (str | Path): Project root; make runs there in live mode.
        make_args (Sequence[str]): Extra make arguments.
        build_kind (BuildKind): CLEAN, INCREMENTAL or SINGLE_TARGET.
        target (str): Target for SINGLE_TARGET builds.
        provider (TraceProvider, optional): Defaults to LiveStraceProvider.
        store (str | Path, optional): When given, the trace is written to <store>/traces/.
        commit (str): Commit the build belongs to (trace file naming only).

    Returns:
        BuildTrace: The recorded events.

    Raises:
        BuildFailed, TargetBuildFailed, TracerUnavailable
    """
    if build_kind is BuildKind.SINGLE_TARGET and not target:
        raise ValueError("single-target builds need a target")
    provider = provider or LiveStraceProvider(project_root, make_args)
    trace = provider.trace_build(build_kind, target)

    if store is not None:
        traces_dir = store_paths(store).traces
        traces_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(traces_dir / trace_file_name(commit, build_kind, target), dump_trace(trace))
    return trace


# ----------------------------------------------------------------------------------------------------
# Standalone Execution (Diagnostic)
# ----------------------------------------------------------------------------------------------------
if __name__ == "__main__":
    """
    Print the Actual graph derived from a trace file:
        python processes/P09_tracer.py <file.trace>
    """
    if len(sys.argv) != 2:
        print("usage: P09_tracer.py <file.trace>")
        sys.exit(3)
    parsed = parse_trace(Path(sys.argv[1]).read_text(encoding="utf-8"))
    graph = build_actual_graph(parsed)
    for name in sorted(graph.nodes):
        print(f"{name}: {' '.join(sorted(graph.deps_of(name)))}")
