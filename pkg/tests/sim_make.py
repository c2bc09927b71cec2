# ====================================================================================================
# sim_make.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   A small simulated GNU make used to generate hermetic fixtures:
#     • a C-like project tree (sources, headers with nested includes, a generated header, one link)
#     • mtime-based incremental builds, forced (-B) builds and forced single-target builds
#     • replay directories: clean/incremental/per-target traces, `make -pn` databases,
#       `make -n -B --debug=basic` output and git-style commit diffs
#   Include resolution and the make timestamp rules are implemented here independently of the
#   checker, so the clean-build graph it records is an oracle for the checker's merged graph.
# ----------------------------------------------------------------------------------------------------
# Layout of a generated project:
#   include/h<N>.h        headers; a header only includes headers created before it
#   include/gen.h         generated from gen/gen.txt (hidden dependency of its includers)
#   src/s<N>.c            sources; src/s<N>.o objects; `app` links every object
#   all → build → {include/gen.h, app}   phony chain
# ====================================================================================================

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
sys.dont_write_bytecode = True

from processes.P00_set_packages import *
from processes.P02_system_processes import ReplayDir
from processes.P04_static_lists import BuildKind, GraphKind, TraceOp
from processes.P06_depgraph import graph_from_edge_map
from processes.P09_tracer import BuildTrace, TraceEvent, build_actual_graph, dump_trace, parse_trace

GEN_HEADER = "include/gen.h"
GEN_INPUT = "gen/gen.txt"
APP = "app"
PHONY = ("all", "build")
README = "README"

_QUOTED_INCLUDE_RE = re.compile(r'^\s*#\s*include\s*"([^"]+)"', re.M)


@dataclass
class SimRule:
    target: str
    prereqs: list
    command: str = ""
    kind: str = "compile"           # compile | link | generate | phony
    source: str = ""

    @property
    def phony(self) -> bool:
        return self.kind == "phony"


@dataclass(frozen=True)
class SimRun:
    target: str
    command: str
    reads: tuple
    created: bool


@dataclass
class CommitRecord:
    commit: str
    diff: str
    incremental: list               # targets remade by the incremental build
    clean_graph: object             # Actual graph of a forced clean build at this commit
    operations: list


class SimMake:
    """Simulated project + make. Every path is project-relative."""

    def __init__(self, root, replay):
        self.root = Path(root).resolve()
        self.replay = Path(replay)
        self.files = {}
        self.rules = {}
        self.headers = []           # header order; a header may include earlier headers only
        self.mtime = {}
        self.clock = 0
        self.counter = 0
        self.renames = {}
        self.committed = set()
        self.root.mkdir(parents=True, exist_ok=True)
        self.replay.mkdir(parents=True, exist_ok=True)

    # ------------------------------------------------------------------------------------------------
    # Project generation
    # ------------------------------------------------------------------------------------------------
    @classmethod
    def generate(cls, root, replay, seed: int, n_sources: Optional[int] = None,
                 declare_headers: bool = True, rd_rate: float = 0.3) -> "SimMake":
        rng = random.Random(seed)
        sim = cls(root, replay)
        sim.files[GEN_INPUT] = f"value {seed}\n"
        sim.files[README] = "fixture\n"

        for index in range(rng.randint(2, 6)):
            earlier = list(sim.headers)
            chosen = rng.sample(earlier, k=rng.randint(0, min(2, len(earlier))))
            sim.add_header(f"include/h{index}.h", chosen)
        sim.counter = len(sim.headers)

        sim.rules["all"] = SimRule("all", ["build"], kind="phony")
        sim.rules["build"] = SimRule("build", [GEN_HEADER, APP], kind="phony")
        sim.rules[GEN_HEADER] = SimRule(GEN_HEADER, [GEN_INPUT], f"./gen.sh {GEN_INPUT} > {GEN_HEADER}", "generate")
        sim.rules[APP] = SimRule(APP, [], kind="link")

        for index in range(n_sources or rng.randint(3, 12)):
            sim.add_source(f"src/s{index}.c", sim.random_includes(rng), rng, declare_headers, rd_rate)
        sim.counter = max(sim.counter, len(sim.objects()))
        sim._relink()
        return sim

    def random_includes(self, rng) -> list:
        includes = rng.sample(self.headers, k=rng.randint(0, min(3, len(self.headers))))
        if rng.random() < 0.3:
            includes.append(GEN_HEADER)
        return includes

    @staticmethod
    def _include_line(header: str) -> str:
        return f'#include "{posixpath.basename(header)}"'

    def add_header(self, path: str, includes: Sequence[str]) -> None:
        guard = posixpath.basename(path).replace(".", "_").upper()
        lines = [f"#ifndef {guard}", f"#define {guard}"]
        lines += [self._include_line(h) for h in includes]
        lines += [f"int {guard.lower()}_fn(void);", "#endif"]
        self.files[path] = "\n".join(lines) + "\n"
        self.headers.append(path)

    def add_source(self, path: str, includes: Sequence[str], rng, declare_headers: bool = True,
                   rd_rate: float = 0.3) -> str:
        stem = posixpath.splitext(posixpath.basename(path))[0]
        lines = [self._include_line(h) for h in includes] + ["#include <stdio.h>", "",
                                                             f"int {stem}_main(void) {{ return 0; }}"]
        self.files[path] = "\n".join(lines) + "\n"
        obj = posixpath.splitext(path)[0] + ".o"
        closure = sorted(self.closure(path, assume_generated=True))
        prereqs = [path]
        if declare_headers:
            prereqs += [h for h in closure if rng.random() < 0.6]
            unused = [h for h in self.headers if h not in closure]
            if unused and rng.random() < rd_rate:
                prereqs.append(rng.choice(unused))
        self.rules[obj] = SimRule(obj, prereqs, "", "compile", path)
        self._set_compile_command(obj, "")
        return obj

    def _set_compile_command(self, obj: str, flags: str) -> None:
        rule = self.rules[obj]
        flag_text = f" {flags}" if flags else ""
        rule.command = f"cc -Iinclude{flag_text} -c -o {obj} {rule.source}"

    def objects(self) -> list:
        return [t for t, r in self.rules.items() if r.kind == "compile"]

    def _relink(self) -> None:
        objects = self.objects()
        self.rules[APP].prereqs = list(objects)
        self.rules[APP].command = "cc -o app " + " ".join(objects)

    # ------------------------------------------------------------------------------------------------
    # Include resolution (quoted includes only; angled ones are system headers)
    # ------------------------------------------------------------------------------------------------
    def _exists(self, path: str, assume_generated: bool = False) -> bool:
        if path in self.files:
            return True
        return path == GEN_HEADER and (assume_generated or path in self.mtime)

    def _text(self, path: str) -> str:
        if path == GEN_HEADER:
            return "#define GEN_VALUE 1\n"
        return self.files.get(path, "")

    def resolve(self, name: str, including: str, assume_generated: bool = False) -> Optional[str]:
        for directory in (posixpath.dirname(including), "include"):
            candidate = posixpath.normpath(posixpath.join(directory, name))
            if self._exists(candidate, assume_generated):
                return candidate
        return None

    def closure(self, path: str, assume_generated: bool = False) -> set:
        found, queue = set(), deque([path])
        while queue:
            current = queue.popleft()
            for name in _QUOTED_INCLUDE_RE.findall(self._text(current)):
                resolved = self.resolve(name, current, assume_generated)
                if resolved and resolved not in found and resolved != path:
                    found.add(resolved)
                    queue.append(resolved)
        return found

    def include_manifest(self) -> dict:
        """{object: project headers reachable from its source}."""
        return {obj: self.closure(self.rules[obj].source) for obj in self.objects()}

    # ------------------------------------------------------------------------------------------------
    # Make semantics
    # ------------------------------------------------------------------------------------------------
    def _reads(self, rule: SimRule) -> tuple:
        if rule.kind == "compile":
            return (rule.source, *sorted(self.closure(rule.source)))
        if rule.kind == "generate":
            return (GEN_INPUT,)
        return tuple(rule.prereqs)

    def run_make(self, goals: Sequence[str], force: bool, side_effects: bool = True) -> list:
        saved = (dict(self.mtime), self.clock)
        runs, visited = [], set()

        def visit(target: str) -> None:
            if target in visited:
                return
            visited.add(target)
            rule = self.rules.get(target)
            if rule is None:
                return
            for prereq in rule.prereqs:
                visit(prereq)
            if rule.phony:
                return
            stale = force or target not in self.mtime or any(
                self.mtime.get(p, 0) > self.mtime[target] for p in rule.prereqs)
            if stale:
                created = target not in self.mtime
                reads = self._reads(rule)
                self.clock += 1
                self.mtime[target] = self.clock
                runs.append(SimRun(target, rule.command, reads, created))

        for goal in goals:
            visit(goal)
        if side_effects:
            for run in runs:
                self._write(run.target, self._text(run.target) if run.target == GEN_HEADER else f"built {run.target}\n")
        else:
            self.mtime, self.clock = saved
        return runs

    def touch(self, path: str) -> list:
        """Bump a file's mtime and run an incremental build; returns the remade targets."""
        self.clock += 1
        self.mtime[path] = self.clock
        return [run.target for run in self.run_make(["all"], force=False)]

    def trace_text(self, runs: Sequence[SimRun], make_command: str) -> str:
        events, seq = [], itertools.count(1)
        events.append(TraceEvent(next(seq), 1, 0, TraceOp.EXEC, make_command))
        for index, run in enumerate(runs):
            pid = 100 + index
            events.append(TraceEvent(next(seq), pid, 1, TraceOp.SPAWN))
            events.append(TraceEvent(next(seq), pid, 1, TraceOp.EXEC, run.command))
            events.extend(TraceEvent(next(seq), pid, 1, TraceOp.READ, path) for path in run.reads)
            events.append(TraceEvent(next(seq), pid, 1, TraceOp.CREATE if run.created else TraceOp.WRITE, run.target))
            events.append(TraceEvent(next(seq), pid, 1, TraceOp.EXIT, "0"))
        events.append(TraceEvent(next(seq), 1, 0, TraceOp.EXIT, "0"))
        return dump_trace(BuildTrace(tuple(events), str(self.root)))

    # ------------------------------------------------------------------------------------------------
    # Recorded make output
    # ------------------------------------------------------------------------------------------------
    def makefile_text(self) -> str:
        lines = ["# simulated fixture", "all: build", f"build: {GEN_HEADER} {APP}", ".PHONY: all build", ""]
        for rule in self.rules.values():
            if rule.phony:
                continue
            lines += [f"{rule.target}: {' '.join(rule.prereqs)}".rstrip(), f"\t{rule.command}", ""]
        return "\n".join(lines)

    def make_database(self) -> str:
        lines = ["# GNU Make 4.3", "# Built for x86_64-pc-linux-gnu", "",
                 "# Make data base, printed on Thu Jan  1 00:00:00 2026", "",
                 "# Variables", "", "CC = cc", "", "# Files", ""]
        for path in sorted(self.files):
            if path not in self.rules:
                lines += ["# Not a target:", f"{path}:", "#  Implicit rule search has not been done.", ""]
        for rule in self.rules.values():
            lines.append(f"{rule.target}: {' '.join(rule.prereqs)}".rstrip())
            if rule.phony:
                lines.append("#  Phony target (prerequisite of .PHONY).")
            lines.append("#  Implicit rule search has not been done.")
            if rule.command:
                lines += ["#  recipe to execute (from 'Makefile', line 1):", f"\t{rule.command}"]
            lines.append("")
        lines += [".PHONY: all build", "#  Implicit rule search has not been done.", "",
                  "# files hash-table stats:", "# Load=1/1024=0%, Rehash=0, Collisions=0/1=0%", "",
                  "# VPATH Search Paths", "", "# No 'vpath' search paths.", ""]
        return "\n".join(lines)

    def dry_run(self) -> str:
        saved = (dict(self.mtime), self.clock)
        runs = self.run_make(["all"], force=True, side_effects=False)
        self.mtime, self.clock = saved
        lines = ["GNU Make 4.3", "Built for x86_64-pc-linux-gnu", "Reading makefiles...",
                 "Updating makefiles....", "Updating goal targets...."]
        for run in runs:
            lines += [f" File '{run.target}' does not exist.", f"   Must remake target '{run.target}'.",
                      run.command, f"   Successfully remade target file '{run.target}'."]
        for name in reversed(PHONY):
            lines += [f"Must remake target '{name}'.", f"Successfully remade target file '{name}'."]
        return "\n".join(lines) + "\n"

    # ------------------------------------------------------------------------------------------------
    # Disk + replay recording
    # ------------------------------------------------------------------------------------------------
    def _write(self, path: str, text: str) -> None:
        full = self.root / path
        full.parent.mkdir(parents=True, exist_ok=True)
        full.write_text(text, encoding="utf-8")

    def tracked(self) -> dict:
        return {**self.files, "Makefile": self.makefile_text()}

    def _record(self, commit: str, name: str, text: str) -> None:
        path = self.replay / commit / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")

    def _record_build_outputs(self, commit: str) -> object:
        self._record(commit, ReplayDir.MAKE_DB, self.make_database())
        self._record(commit, ReplayDir.MAKE_DRY_RUN, self.dry_run())
        for target, rule in self.rules.items():
            if rule.phony:
                continue
            runs = self.run_make([target], force=True, side_effects=False)
            self._record(commit, f"targets/{ReplayDir.target_file_name(target)}",
                         self.trace_text(runs, f"make -B {target}"))
        clean_text = self.trace_text(self.run_make(["all"], force=True, side_effects=False), "make -B")
        self._record(commit, ReplayDir.CLEAN_TRACE, clean_text)
        return build_actual_graph(parse_trace(clean_text))

    def init(self, commit: str = "c00") -> object:
        """Write the tree, run the first build and record the init replay; returns the clean graph."""
        for path, text in self.tracked().items():
            self._write(path, text)
            self.clock += 1
            self.mtime[path] = self.clock
        runs = self.run_make(["all"], force=True)
        self._record(commit, ReplayDir.CLEAN_TRACE, self.trace_text(runs, "make -B"))
        self._record(commit, ReplayDir.MAKE_DB, self.make_database())
        self._record(commit, ReplayDir.MAKE_DRY_RUN, self.dry_run())
        return build_actual_graph(parse_trace(self.trace_text(runs, "make -B")))

    def commit(self, commit: str, mutate) -> CommitRecord:
        """Apply `mutate(sim)`, write the tree, record diff + builds, return the clean-build oracle."""
        before = self.tracked()
        self.renames = {}
        self.committed = set(before)
        operations = mutate(self) or []
        after = self.tracked()

        for path in set(before) - set(after):
            (self.root / path).unlink()
            self.mtime.pop(path, None)
        for path, text in after.items():
            if before.get(path) != text:
                self._write(path, text)
                self.clock += 1
                self.mtime[path] = self.clock

        diff = git_diff(before, after, self.renames)
        self._record(commit, ReplayDir.COMMIT_DIFF, diff)
        runs = self.run_make(["all"], force=False)
        self._record(commit, ReplayDir.INCREMENTAL_TRACE, self.trace_text(runs, "make"))
        clean_graph = self._record_build_outputs(commit)
        return CommitRecord(commit, diff, [r.target for r in runs], clean_graph, operations)

    # ------------------------------------------------------------------------------------------------
    # Commit operations
    # ------------------------------------------------------------------------------------------------
    def _next_name(self, pattern: str) -> str:
        self.counter += 1
        return pattern.format(self.counter)

    def _code_files(self) -> list:
        return sorted(p for p in self.files if p.endswith((".c", ".h")))

    def _allowed_includes(self, path: str) -> list:
        if path.endswith(".c"):
            return list(self.headers) + [GEN_HEADER]
        if path in self.headers:
            return self.headers[: self.headers.index(path)]
        return []

    def _add_line(self, path: str, line: str) -> None:
        self.files[path] = line + "\n" + self.files[path]

    def _drop_line(self, path: str, line: str) -> None:
        self.files[path] = "".join(l for l in self.files[path].splitlines(keepends=True) if l.rstrip("\n") != line)

    def op_add_include(self, rng) -> str:
        for path in rng.sample(self._code_files(), k=len(self._code_files())):
            present = set(_QUOTED_INCLUDE_RE.findall(self.files[path]))
            options = [h for h in self._allowed_includes(path) if posixpath.basename(h) not in present]
            if options:
                header = rng.choice(options)
                self._add_line(path, self._include_line(header))
                return f"add include {header} to {path}"
        return "noop"

    def op_remove_include(self, rng) -> str:
        for path in rng.sample(self._code_files(), k=len(self._code_files())):
            names = _QUOTED_INCLUDE_RE.findall(self.files[path])
            if names:
                name = rng.choice(names)
                self._drop_line(path, f'#include "{name}"')
                return f"remove include {name} from {path}"
        return "noop"

    def op_body_edit(self, rng) -> str:
        path = rng.choice(self._code_files())
        self.files[path] += f"/* edit {self.clock} */\n"
        return f"edit {path}"

    def op_noop(self, rng) -> str:
        self.files[README] += f"line {self.clock}\n"
        return "readme"

    def op_add_source(self, rng) -> str:
        path = self._next_name("src/s{}.c")
        self.add_source(path, self.random_includes(rng), rng)
        self._relink()
        return f"add {path}"

    def _stable(self, path: str) -> bool:
        return path in self.committed and path not in self.renames.values()

    def op_delete_source(self, rng) -> str:
        objects = [o for o in self.objects() if self._stable(self.rules[o].source)]
        if len(self.objects()) <= 2 or not objects:
            return self.op_noop(rng)
        obj = rng.choice(objects)
        del self.files[self.rules.pop(obj).source]
        self._relink()
        return f"delete source of {obj}"

    def op_rename_source(self, rng) -> str:
        objects = [o for o in self.objects() if self._stable(self.rules[o].source)]
        if not objects:
            return self.op_noop(rng)
        obj = rng.choice(objects)
        rule = self.rules.pop(obj)
        new_source = self._next_name("src/s{}.c")
        new_obj = posixpath.splitext(new_source)[0] + ".o"
        self.files[new_source] = self.files.pop(rule.source)
        self.renames[rule.source] = new_source
        self.rules[new_obj] = SimRule(new_obj, [new_source] + rule.prereqs[1:], "", "compile", new_source)
        self._set_compile_command(new_obj, "")
        self._relink()
        return f"rename {rule.source} -> {new_source}"

    def _replace_header_refs(self, old: str, new: Optional[str]) -> None:
        old_line = f'#include "{posixpath.basename(old)}"'
        for path in list(self.files):
            if old_line in self.files[path].splitlines():
                if new is None:
                    self._drop_line(path, old_line)
                else:
                    self.files[path] = self.files[path].replace(old_line, self._include_line(new))
        for rule in self.rules.values():
            if old in rule.prereqs:
                rule.prereqs = [p for p in rule.prereqs if p != old] if new is None else \
                    [new if p == old else p for p in rule.prereqs]

    def op_rename_header(self, rng) -> str:
        headers = [h for h in self.headers if self._stable(h)]
        if not headers:
            return self.op_noop(rng)
        old = rng.choice(headers)
        new = self._next_name("include/r{}.h")
        self.files[new] = self.files.pop(old)
        self.headers[self.headers.index(old)] = new
        self.renames[old] = new
        self._replace_header_refs(old, new)
        return f"rename {old} -> {new}"

    def op_delete_header(self, rng) -> str:
        headers = [h for h in self.headers if self._stable(h)]
        if len(self.headers) <= 2 or not headers:
            return self.op_noop(rng)
        old = rng.choice(headers)
        del self.files[old]
        self.headers.remove(old)
        self._replace_header_refs(old, None)
        return f"delete {old}"

    def op_recipe_edit(self, rng) -> str:
        obj = rng.choice(self.objects())
        flags = "" if "-O2" in self.rules[obj].command else "-O2"
        self._set_compile_command(obj, flags)
        return f"recipe {obj} {flags or 'plain'}"

    def op_declared_edit(self, rng) -> str:
        obj = rng.choice(self.objects())
        rule = self.rules[obj]
        extra = rule.prereqs[1:]
        if extra and rng.random() < 0.5:
            dropped = rng.choice(extra)
            rule.prereqs.remove(dropped)
            return f"undeclare {dropped} for {obj}"
        options = [h for h in self.headers if h not in rule.prereqs]
        if not options:
            return "noop"
        added = rng.choice(options)
        rule.prereqs.append(added)
        return f"declare {added} for {obj}"

    OPERATIONS = ("op_add_include", "op_remove_include", "op_body_edit", "op_noop", "op_add_source",
                  "op_delete_source", "op_rename_source", "op_rename_header", "op_delete_header",
                  "op_recipe_edit", "op_declared_edit")

    def random_mutation(self, rng, max_ops: int = 3):
        def mutate(sim: "SimMake") -> list:
            return [getattr(sim, rng.choice(sim.OPERATIONS))(rng) for _ in range(rng.randint(1, max_ops))]
        return mutate


# ----------------------------------------------------------------------------------------------------
# git_diff()
# ----------------------------------------------------------------------------------------------------
def git_diff(before: Mapping[str, str], after: Mapping[str, str], renames: Mapping[str, str]) -> str:
    """git-style unified diff of two trees; `renames` are emitted as pure renames (content equal)."""
    chunks = []
    for old, new in sorted(renames.items()):
        a, b = before[old], after[new]
        similarity = 100 if a == b else 90
        chunk = f"diff --git a/{old} b/{new}\nsimilarity index {similarity}%\nrename from {old}\nrename to {new}\n"
        if a != b:
            body = difflib.unified_diff(a.splitlines(), b.splitlines(), f"a/{old}", f"b/{new}", lineterm="")
            chunk += "\n".join(body) + "\n"
        chunks.append(chunk)
    renamed = set(renames) | set(renames.values())
    for path in sorted((set(before) | set(after)) - renamed):
        old, new = before.get(path), after.get(path)
        if old == new:
            continue
        if old is None:
            head = f"diff --git a/{path} b/{path}\nnew file mode 100644\n"
            body = difflib.unified_diff([], new.splitlines(), "/dev/null", f"b/{path}", lineterm="")
        elif new is None:
            head = f"diff --git a/{path} b/{path}\ndeleted file mode 100644\n"
            body = difflib.unified_diff(old.splitlines(), [], f"a/{path}", "/dev/null", lineterm="")
        else:
            head = f"diff --git a/{path} b/{path}\n"
            body = difflib.unified_diff(old.splitlines(), new.splitlines(), f"a/{path}", f"b/{path}", lineterm="")
        chunks.append(head + "\n".join(body) + "\n")
    return "".join(chunks)


def oracle_edges(graph) -> dict:
    return graph.edge_map()


def edge_graph(edge_map: Mapping[str, Iterable[str]]):
    return graph_from_edge_map(edge_map, GraphKind.ACTUAL)
