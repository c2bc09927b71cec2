# ====================================================================================================
# P12_detector.py
# ----------------------------------------------------------------------------------------------------
# Purpose:
#   Compares the merged actual graph with the declared graph and reports:
#     • MD (missing dependency)   : read by the build, not declared in the Makefile
#     • RD (redundant dependency) : declared in the Makefile, never read by the build
# ----------------------------------------------------------------------------------------------------
# Output formats:
#   human   : findings grouped by target, then warnings and counters
#   machine : `#depsentry-report v1` header, one `kind<TAB>target<TAB>dependency<TAB>evidence<TAB>commit`
#             line per finding, `# <n> findings` footer (UTF-8, LF)
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
from processes.P03_shared_functions import atomic_write_text, escape_field, unescape_field
from processes.P04_static_lists import Evidence, FindingKind, Provenance, ReportFormat
from processes.P05_exceptions import ParseError, StateCorrupt, StateMissing
from processes.P06_depgraph import DependencyGraph

logger = logging.getLogger(__name__)

REPORT_HEADER = "#depsentry-report v1"
ORDER_ONLY_NOTE = "order-only prerequisite"

_KIND_LABELS = {FindingKind.MISSING: "missing", FindingKind.REDUNDANT: "redundant"}


@dataclass(frozen=True)
class Finding:
    kind: FindingKind
    target: str
    dependency: str
    evidence: Evidence = Evidence.HISTORICAL
    commit: str = ""
    note: str = ""

    @property
    def sort_key(self) -> tuple:
        return self.target, self.kind.value, self.dependency


@dataclass
class ErrorReport:
    """Findings in (target, kind, dependency) order, plus warnings and counters."""
    findings: SortedList = field(default_factory=lambda: SortedList(key=lambda f: f.sort_key))
    warnings: list = field(default_factory=list)
    stats: Counter = field(default_factory=Counter)
    commit: str = ""

    def __post_init__(self):
        if not isinstance(self.findings, SortedList):
            self.findings = SortedList(self.findings, key=lambda f: f.sort_key)

    def add(self, finding: Finding) -> None:
        self.findings.add(finding)

    def of_kind(self, kind: FindingKind) -> list:
        return [f for f in self.findings if f.kind is kind]

    @property
    def finding_targets(self) -> frozenset:
        return frozenset(f.target for f in self.findings)

    def pairs(self) -> set:
        """{(kind code, target, dependency)} for comparisons that ignore evidence."""
        return {(f.kind.value, f.target, f.dependency) for f in self.findings}


def _evidence(graph: DependencyGraph, target: str, commit: str) -> Evidence:
    node = graph.nodes.get(target)
    if node is None or node.last_updated_commit != commit:
        return Evidence.HISTORICAL
    if node.provenance is Provenance.INFERRED:
        return Evidence.INFERRED
    return Evidence.TRACE


# ----------------------------------------------------------------------------------------------------
# detect()
# ----------------------------------------------------------------------------------------------------
def detect(actual: DependencyGraph, declared: DependencyGraph, commit: str = "") -> ErrorReport:
    """
    Diff each target's actual deps against its declared deps.

    Targets only in the actual graph are compared against an empty declaration (every dep is an
    MD) and flagged with a warning. Targets only in the declared graph were not built in this
    configuration: warning only.

    Example:
        fzy.o actual {fzy.c, fzy.h, match.h, tty.h, choices.h, options.h}
        fzy.o declared {fzy.c, fzy.h, choices.h, options.h}
        → MD (fzy.o, match.h), MD (fzy.o, tty.h)
    """
    report = ErrorReport(commit=commit)

    for target in sorted(actual.targets | declared.targets):
        in_actual, in_declared = target in actual, target in declared
        if not in_actual:
            report.warnings.append(f"{target}: declared but not built in this configuration")
            report.stats["declared_only_targets"] += 1
            continue
        if not in_declared:
            report.warnings.append(f"{target}: built but declared by no rule")
            report.stats["undeclared_targets"] += 1

        report.stats["targets_compared"] += 1
        actual_deps = actual.deps_of(target)
        declared_deps = declared.deps_of(target)
        order_only = declared.nodes[target].order_only if in_declared else frozenset()
        evidence = _evidence(actual, target, commit)

        for dep in actual_deps - declared_deps:
            report.add(Finding(FindingKind.MISSING, target, dep, evidence, commit))
        for dep in declared_deps - actual_deps:
            note = ORDER_ONLY_NOTE if dep in order_only else ""
            report.add(Finding(FindingKind.REDUNDANT, target, dep, evidence, commit, note))

    report.stats["missing"] = len(report.of_kind(FindingKind.MISSING))
    report.stats["redundant"] = len(report.of_kind(FindingKind.REDUNDANT))
    logger.info("✅ %d MDs, %d RDs over %d targets", report.stats["missing"], report.stats["redundant"],
                report.stats["targets_compared"])
    return report


# ----------------------------------------------------------------------------------------------------
# render()
# ----------------------------------------------------------------------------------------------------
def render(report: ErrorReport, fmt: ReportFormat = ReportFormat.HUMAN) -> str:
    if fmt is ReportFormat.MACHINE:
        lines = [REPORT_HEADER]
        lines.extend("\t".join((f.kind.value, escape_field(f.target), escape_field(f.dependency),
                                f.evidence.value, f.commit)) for f in report.findings)
        lines.append(f"# {len(report.findings)} findings")
        return "\n".join(lines) + "\n"

    lines = [f"Dependency check at {report.commit or 'working tree'}: "
             f"{report.stats['missing']} missing, {report.stats['redundant']} redundant"]
    for target, group in more_itertools.groupby_transform(report.findings, lambda f: f.target):
        lines.append("")
        lines.append(f"{target}")
        for f in group:
            suffix = f"  ({f.note})" if f.note else ""
            lines.append(f"  {f.kind.value} {_KIND_LABELS[f.kind]:<9} {f.dependency}  [{f.evidence.value}]{suffix}")
    if report.warnings:
        lines.append("")
        lines.append("Warnings:")
        lines.extend(f"  - {w}" for w in report.warnings)
    lines.append("")
    lines.append(f"{len(report.findings)} findings")
    return "\n".join(lines) + "\n"


def parse_machine_report(text: str) -> list:
    """Findings from machine-format text (the input of `verify`)."""
    lines = text.splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise ParseError(f"expected {REPORT_HEADER!r} header", 1)
    findings = []
    for number, line in enumerate(lines[1:], start=2):
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ParseError(f"expected 5 tab-separated fields, got {len(fields)}", number)
        try:
            kind, evidence = FindingKind(fields[0]), Evidence(fields[3])
        except ValueError as exc:
            raise ParseError(str(exc), number) from exc
        findings.append(Finding(kind, unescape_field(fields[1]), unescape_field(fields[2]), evidence, fields[4]))
    return findings


# ====================================================================================================
# PERSISTENCE (report.v1)
# ====================================================================================================

def save_report(report: ErrorReport, path) -> None:
    payload = {
        "version": 1,
        "commit": report.commit,
        "findings": [
            {"kind": f.kind.value, "target": f.target, "dependency": f.dependency,
             "evidence": f.evidence.value, "commit": f.commit, "note": f.note}
            for f in report.findings
        ],
        "warnings": list(report.warnings),
        "stats": dict(sorted(report.stats.items())),
    }
    atomic_write_text(path, json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


def load_report(path) -> ErrorReport:
    path = Path(path)
    if not path.exists():
        raise StateMissing(f"no report at {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        findings = [Finding(FindingKind(r["kind"]), r["target"], r["dependency"], Evidence(r["evidence"]),
                            r["commit"], r.get("note", "")) for r in payload["findings"]]
        return ErrorReport(findings, list(payload["warnings"]), Counter(payload["stats"]), payload["commit"])
    except (ValueError, KeyError, TypeError) as exc:
        raise StateCorrupt(f"{path}: {exc}") from exc
