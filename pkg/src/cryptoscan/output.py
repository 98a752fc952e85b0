"""Report emission: partitioned documents over streaming and buffered handlers.

Every format renders a header/body/footer partition (formats may leave
a section unused: the legacy text format has no header). Streaming
handlers write each finding as it arrives and hold at most one rendered
finding in memory; buffered handlers assemble the whole document and
write it at stop. Elements that would be empty are never emitted.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Optional
from xml.sax.saxutils import escape, quoteattr

from . import __version__
from .catalog import Severity
from .rules import BugInstance
from .schema import XsdSubsetValidator

TOOL_NAME = "cryptoscan"
TOOL_VERSION = __version__
SCHEMA_RESOURCE = "scarf_results.xsd"


class OutputError(Exception):
    """Base class for report-emission failures."""


class SinkUnwritable(OutputError):
    """The sink cannot accept writes."""


class SessionClosed(OutputError):
    """Operation on a stopped session."""


class SessionConflict(OutputError):
    """A sink already has an active session."""


class FormatKind(Enum):
    SCARF_XML = "scarf"
    LEGACY = "legacy"
    DEFAULT = "default"


EXTENSIONS = {
    FormatKind.SCARF_XML: ".xml",
    FormatKind.LEGACY: ".txt",
    FormatKind.DEFAULT: ".jsonl",
}


@dataclass(frozen=True)
class OutputFormat:
    kind: FormatKind
    streaming: bool = False

    @property
    def extension(self) -> str:
        return EXTENSIONS[self.kind]


@dataclass(frozen=True)
class Header:
    """Static information known before scanning begins."""

    tool_name: str
    tool_version: str
    started: str
    source_type: str
    inputs: tuple[str, ...]
    flags: tuple[str, ...]


@dataclass(frozen=True)
class Footer:
    """Aggregates over the body, rendered after scanning."""

    ended: str
    total: int
    rule_counts: tuple[tuple[str, int], ...]
    severity_counts: tuple[tuple[str, int], ...]
    unknown_slices: int
    truncated: bool


@dataclass(frozen=True)
class OutputDocument:
    header: Header
    body: tuple[BugInstance, ...]
    footer: Footer


def format_timestamp(moment: datetime) -> str:
    return moment.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def build_header(config, clock: Callable[[], datetime]) -> Header:
    source_type = getattr(config, "source_type", None)
    kind = getattr(source_type, "value", source_type) or ""
    inputs = tuple(s for s in (str(p) for p in getattr(config, "input_paths", ()) or ())
                   if s.strip())
    flags = tuple(f for f in getattr(config, "flag_summary", ()) or () if f.strip())
    return Header(
        tool_name=TOOL_NAME,
        tool_version=TOOL_VERSION,
        started=format_timestamp(clock()),
        source_type=str(kind),
        inputs=inputs,
        flags=flags,
    )


# --- per-format rendering ---------------------------------------------------

def _printable(text: str, keep_newlines: bool = False) -> str:
    """Escape control characters the target format cannot carry."""
    allowed = "\t\n\r" if keep_newlines else "\t"
    return "".join(
        ch if ch >= " " or ch in allowed else f"\\u{ord(ch):04x}" for ch in text
    )


def _xml_el(name: str, value, indent: str) -> str:
    """One text element, or nothing at all when the value is empty.

    Whitespace-only values count as empty: they would survive as
    elements with no effective content and break schema validation.
    """
    if value is None or str(value).strip() == "":
        return ""
    return f"{indent}<{name}>{escape(_printable(str(value), keep_newlines=True))}</{name}>\n"


class _ScarfXmlRenderer:
    uses_header = True

    def prologue(self) -> str:
        return '<?xml version="1.0" encoding="UTF-8"?>\n<AnalyzerReport>\n'

    def epilogue(self) -> str:
        return "</AnalyzerReport>\n"

    def header_parts(self, header: Header):
        yield "  <Header>\n"
        yield _xml_el("ToolName", header.tool_name, "    ")
        yield _xml_el("ToolVersion", header.tool_version, "    ")
        yield _xml_el("ScanStarted", header.started, "    ")
        yield _xml_el("SourceType", header.source_type, "    ")
        inputs = [i for i in header.inputs if str(i).strip()]
        if inputs:
            yield "    <Inputs>\n"
            for item in inputs:
                yield _xml_el("Input", item, "      ")
            yield "    </Inputs>\n"
        flags = [f for f in header.flags if str(f).strip()]
        if flags:
            yield "    <Flags>\n"
            for flag in flags:
                yield _xml_el("Flag", flag, "      ")
            yield "    </Flags>\n"
        yield "  </Header>\n"

    def render_header(self, header: Header) -> str:
        return "".join(self.header_parts(header))

    def render_issue(self, bug: BugInstance) -> str:
        parts = [
            f"  <BugInstance id={quoteattr(str(bug.id))} "
            f"rule={quoteattr(_printable(bug.rule_id))} "
            f"severity={quoteattr(bug.severity.value)}>\n"
        ]
        parts.append(_xml_el("ClassName", bug.class_fqn, "    "))
        parts.append(_xml_el("MethodSignature", bug.method_signature, "    "))
        parts.append(f"    <BytecodeOffset>{bug.bytecode_offset}</BytecodeOffset>\n")
        if bug.source_line is not None:
            parts.append(f"    <SourceLine>{bug.source_line}</SourceLine>\n")
        parts.append(_xml_el("Message", bug.message, "    "))
        parts.append(_xml_el("Evidence", bug.evidence, "    "))
        parts.append("  </BugInstance>\n")
        return "".join(parts)

    def footer_parts(self, footer: Footer):
        yield "  <Footer>\n"
        yield _xml_el("ScanEnded", footer.ended, "    ")
        yield f"    <TotalFindings>{footer.total}</TotalFindings>\n"
        if footer.rule_counts:
            yield "    <RuleCounts>\n"
            for rule_id, count in footer.rule_counts:
                yield (f"      <RuleCount rule={quoteattr(_printable(rule_id))} "
                       f"count={quoteattr(str(count))}/>\n")
            yield "    </RuleCounts>\n"
        if footer.severity_counts:
            yield "    <SeverityCounts>\n"
            for severity, count in footer.severity_counts:
                yield (f"      <SeverityCount severity={quoteattr(severity)} "
                       f"count={quoteattr(str(count))}/>\n")
            yield "    </SeverityCounts>\n"
        yield f"    <UnknownSlices>{footer.unknown_slices}</UnknownSlices>\n"
        if footer.truncated:
            yield "    <Truncated>true</Truncated>\n"
        yield "  </Footer>\n"

    def render_footer(self, footer: Footer) -> str:
        return "".join(self.footer_parts(footer))


class _LegacyRenderer:
    """Human-readable text; body and footer only, no header content."""

    uses_header = False

    def prologue(self) -> str:
        return ""

    def epilogue(self) -> str:
        return ""

    def render_header(self, header: Header) -> str:
        return ""

    def render_issue(self, bug: BugInstance) -> str:
        def flat(text: str) -> str:
            return _printable(text.replace("\n", " ").replace("\r", " "))

        location = f"{flat(bug.class_fqn)} {flat(bug.method_signature)} @{bug.bytecode_offset}"
        if bug.source_line is not None:
            location += f" line {bug.source_line}"
        lines = [f"#{bug.id} {flat(bug.rule_id)} [{bug.severity.value}] {location}"]
        if bug.message:
            lines.append(f"    {flat(bug.message)}")
        if bug.evidence:
            lines.append(f"    evidence: {flat(bug.evidence)}")
        return "\n".join(lines) + "\n\n"

    def footer_parts(self, footer: Footer):
        yield "-- scan summary --\n"
        severity_part = ", ".join(f"{s}: {c}" for s, c in footer.severity_counts)
        yield (f"findings: {footer.total}"
               + (f" ({severity_part})" if severity_part else "") + "\n")
        if footer.rule_counts:
            by_rule = ", ".join(f"{r}: {c}" for r, c in footer.rule_counts)
            yield f"by rule: {by_rule}\n"
        yield f"unknown slices: {footer.unknown_slices}\n"
        if footer.truncated:
            yield "truncated: scan timed out; results are partial\n"

    def render_footer(self, footer: Footer) -> str:
        return "".join(self.footer_parts(footer))

    def header_parts(self, header: Header):
        return iter(())


class _DefaultRenderer:
    """Line-delimited records: one finding per line plus a summary record."""

    uses_header = False

    def prologue(self) -> str:
        return ""

    def epilogue(self) -> str:
        return ""

    def render_header(self, header: Header) -> str:
        return ""

    def render_issue(self, bug: BugInstance) -> str:
        record = {
            "record": "finding",
            "id": bug.id,
            "rule": bug.rule_id,
            "severity": bug.severity.value,
            "class": bug.class_fqn,
            "method": bug.method_signature,
            "offset": bug.bytecode_offset,
        }
        if bug.source_line is not None:
            record["line"] = bug.source_line
        if bug.message:
            record["message"] = bug.message
        if bug.evidence:
            record["evidence"] = bug.evidence
        return json.dumps(record, sort_keys=True) + "\n"

    def render_footer(self, footer: Footer) -> str:
        record = {"record": "summary", "total": footer.total,
                  "unknown_slices": footer.unknown_slices}
        if footer.rule_counts:
            record["by_rule"] = dict(footer.rule_counts)
        if footer.severity_counts:
            record["by_severity"] = dict(footer.severity_counts)
        if footer.truncated:
            record["truncated"] = True
        return json.dumps(record, sort_keys=True) + "\n"

    def footer_parts(self, footer: Footer):
        yield self.render_footer(footer)

    def header_parts(self, header: Header):
        return iter(())


_RENDERERS = {
    FormatKind.SCARF_XML: _ScarfXmlRenderer(),
    FormatKind.LEGACY: _LegacyRenderer(),
    FormatKind.DEFAULT: _DefaultRenderer(),
}

_SEVERITY_ORDER = (Severity.HIGH, Severity.MEDIUM, Severity.LOW)

_active_sinks: set[int] = set()


class OutputSession:
    """Single-writer emission session over one sink.

    add_issue calls must be externally serialized; the session never
    spawns concurrency of its own.
    """

    def __init__(self, config, sink, clock: Optional[Callable[[], datetime]] = None):
        fmt: OutputFormat = getattr(config, "format", None) or OutputFormat(FormatKind.DEFAULT)
        if not hasattr(sink, "write"):
            raise SinkUnwritable("sink has no write method")
        if id(sink) in _active_sinks:
            raise SessionConflict("sink already has an active session")
        self.format = fmt
        self._renderer = _RENDERERS[fmt.kind]
        self._sink = sink
        self._clock = clock or _utc_now
        self.header = build_header(config, self._clock)
        self._issues: list[BugInstance] = []       # buffered mode only
        self._buffer_bytes = 0
        self.peak_buffer_bytes = 0
        self._count = 0
        self._rule_counts: Counter = Counter()
        self._severity_counts: Counter = Counter()
        self._unknown_slices = 0
        self._truncated = False
        self._closed = False
        if fmt.streaming:
            self._write(self._renderer.prologue())
            if self._renderer.uses_header:
                for part in self._renderer.header_parts(self.header):
                    self._write(part)
            self._flush()
        _active_sinks.add(id(sink))

    def _write(self, text: str) -> None:
        if not text:
            return
        data = text.encode("utf-8")
        self.peak_buffer_bytes = max(self.peak_buffer_bytes, len(data))
        try:
            self._sink.write(data)
        except (OSError, ValueError) as exc:
            raise SinkUnwritable(str(exc)) from None

    def _flush(self) -> None:
        flush = getattr(self._sink, "flush", None)
        if flush is not None:
            flush()

    def add_issue(self, issue: BugInstance) -> None:
        """Record one finding; streamed sessions render and flush it
        before returning."""
        if self._closed:
            raise SessionClosed("add_issue after stop_analyzing")
        self._count += 1
        self._rule_counts[issue.rule_id] += 1
        self._severity_counts[issue.severity.value] += 1
        if self.format.streaming:
            self._write(self._renderer.render_issue(issue))
            self._flush()
        else:
            self._issues.append(issue)
            self._buffer_bytes += len(self._renderer.render_issue(issue).encode("utf-8"))
            self.peak_buffer_bytes = max(self.peak_buffer_bytes, self._buffer_bytes)

    def record_unknown_slices(self, count: int) -> None:
        self._unknown_slices = count

    def mark_truncated(self) -> None:
        self._truncated = True

    def _build_footer(self) -> Footer:
        severity_counts = tuple(
            (s.value, self._severity_counts[s.value])
            for s in _SEVERITY_ORDER if self._severity_counts[s.value]
        )
        rule_counts = tuple(sorted(self._rule_counts.items()))
        return Footer(
            ended=format_timestamp(self._clock()),
            total=self._count,
            rule_counts=rule_counts,
            severity_counts=severity_counts,
            unknown_slices=self._unknown_slices,
            truncated=self._truncated,
        )

    def stop(self) -> None:
        """Render the footer with exact counts, close the document, and
        flush; the session is unusable afterwards."""
        if self._closed:
            raise SessionClosed("stop_analyzing called twice")
        footer = self._build_footer()
        renderer = self._renderer
        try:
            if self.format.streaming:
                for part in renderer.footer_parts(footer):
                    self._write(part)
                self._write(renderer.epilogue())
            else:
                document = OutputDocument(self.header, tuple(self._issues), footer)
                parts = [renderer.prologue()]
                if renderer.uses_header:
                    parts.append(renderer.render_header(document.header))
                parts.extend(renderer.render_issue(b) for b in document.body)
                parts.append(renderer.render_footer(document.footer))
                parts.append(renderer.epilogue())
                self._write("".join(parts))
            self._flush()
        finally:
            self._closed = True
            _active_sinks.discard(id(self._sink))


def start_analyzing(config, sink,
                    clock: Optional[Callable[[], datetime]] = None) -> OutputSession:
    """Open an emission session; streaming formats write their header
    immediately, buffered formats leave the sink untouched until stop."""
    return OutputSession(config, sink, clock)


def add_issue(session: OutputSession, issue: BugInstance) -> None:
    session.add_issue(issue)


def stop_analyzing(session: OutputSession) -> None:
    session.stop()


# --- validation --------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def load_schema_validator() -> XsdSubsetValidator:
    ref = resources.files("cryptoscan").joinpath("resources", SCHEMA_RESOURCE)
    with resources.as_file(ref) as path:
        return XsdSubsetValidator.from_path(path)


def find_empty_elements(root: ET.Element) -> list[str]:
    """Paths of elements carrying neither text nor children nor attributes."""
    empty: list[str] = []

    def walk(node: ET.Element, path: str) -> None:
        if not (node.text or "").strip() and len(node) == 0 and not node.attrib:
            empty.append(path)
        for i, child in enumerate(node):
            walk(child, f"{path}/{child.tag}[{i}]")

    walk(root, f"/{root.tag}")
    return empty


def _validate_scarf(path: Path) -> list[str]:
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        return [f"not well-formed XML: {exc}"]
    violations = load_schema_validator().validate(root)
    violations.extend(f"empty element: {p}" for p in find_empty_elements(root))
    return violations


def _validate_legacy(path: Path) -> list[str]:
    violations: list[str] = []
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        return [f"unreadable: {exc}"]
    lines = text.splitlines()
    findings = sum(1 for line in lines if line.startswith("#") and " " in line)
    if "-- scan summary --" not in lines:
        violations.append("missing summary section")
        return violations
    totals = [line for line in lines if line.startswith("findings: ")]
    if len(totals) != 1:
        violations.append("summary must state the findings count exactly once")
        return violations
    stated = int(totals[0].split()[1])
    if stated != findings:
        violations.append(f"summary states {stated} findings, body has {findings}")
    return violations


def _validate_default(path: Path) -> list[str]:
    violations: list[str] = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        return [f"unreadable: {exc}"]
    records = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            violations.append(f"line {i}: invalid record: {exc}")
    if violations:
        return violations
    if not records or records[-1].get("record") != "summary":
        violations.append("missing trailing summary record")
        return violations
    findings = sum(1 for r in records[:-1] if r.get("record") == "finding")
    stated = records[-1].get("total")
    if stated != findings:
        violations.append(f"summary states {stated} findings, body has {findings}")
    return violations


def validate_document(path: Path, kind: FormatKind) -> ValidationReport:
    """Check a produced document: schema conformance for the XML format,
    structural consistency for the text formats."""
    path = Path(path)
    if not path.exists():
        return ValidationReport((f"no such file: {path}",))
    if kind is FormatKind.SCARF_XML:
        violations = _validate_scarf(path)
    elif kind is FormatKind.LEGACY:
        violations = _validate_legacy(path)
    else:
        violations = _validate_default(path)
    return ValidationReport(tuple(violations))
