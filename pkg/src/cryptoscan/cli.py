"""Validating command line and scan orchestration.

The argument parser is hand-rolled: blank tokens are trimmed before
parsing, cross-flag dependencies are validated with messages that name
the offending value and the violated rule, and every failure surfaces
as one structured error (never a crash). The scan itself runs under a
wall-clock deadline polled at class boundaries; on expiry the output
session is closed cleanly with a truncation marker and the timeout
exit code is returned.
"""

from __future__ import annotations

import os
import sys
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .catalog import CatalogError, Severity, load_catalog
from .classfile import ClassFileError
from .intake import IntakeError, SourceType, assemble_scan_set, resolve_dependency_dirs
from .intake import DEFAULT_BUILD_OUTPUT_SUBTREES
from .output import (
    EXTENSIONS,
    FormatKind,
    OutputError,
    OutputFormat,
    start_analyzing,
    stop_analyzing,
)
from .rules import rules_from_catalog, run_rules
from .slicer import IrIndex, Unknown, backward_slice, find_criteria

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_ARGS = 2
EXIT_ENV = 3
EXIT_TIMEOUT = 4
EXIT_INTERNAL = 5

EXIT_CODE_TABLE = (
    (EXIT_OK, "success"),
    (EXIT_FINDINGS, "findings at or above the --fail-on severity gate"),
    (EXIT_ARGS, "argument or input error"),
    (EXIT_ENV, "required environment variable unset (see --check-env)"),
    (EXIT_TIMEOUT, "scan abandoned at --timeout; document is truncation-marked"),
    (EXIT_INTERNAL, "internal error"),
)

# The three required environment variables: (name, meaning, example value).
ENV_REQUIREMENTS = (
    ("JAVA_HOME", "home directory of the Java toolchain", "/usr/lib/jvm/default"),
    ("JAVA_VERSION", "Java runtime version identifier", "1.8"),
    ("CRYPTOSCAN_HOME", "cryptoscan home directory", "/opt/cryptoscan"),
)

_SOURCE_TYPES = {t.value: t for t in SourceType}
_FORMAT_KINDS = {k.value: k for k in FormatKind}
_SEVERITIES = {s.value: s for s in Severity}

_INPUT_EXTENSIONS = {
    SourceType.ARCHIVE: (".jar", ".zip"),
    SourceType.CLASS_FILES: (".class",),
    SourceType.SOURCE_FILES: (".java",),
    SourceType.PROJECT_DIR: None,  # directories: checked at scan time
}


class ArgumentValidationError(Exception):
    """One structured argument failure: kind plus a message naming the
    offending value and the violated rule."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class ScanTimeout(Exception):
    """Raised by the deadline poll when the wall clock budget is spent."""


class Deadline:
    """Cooperative cancellation signal polled at class boundaries."""

    def __init__(self, seconds: float):
        self._expires = time.monotonic() + seconds

    def check(self) -> None:
        if time.monotonic() > self._expires:
            raise ScanTimeout()


class Mode(Enum):
    SCAN = "scan"
    ENUM = "enum"
    CHECK_ENV = "check-env"


@dataclass
class ScanConfig:
    """A fully validated scan request."""

    mode: Mode = Mode.SCAN
    source_type: Optional[SourceType] = None
    input_paths: tuple[str, ...] = ()
    dependency_paths: tuple[str, ...] = ()
    format: OutputFormat = OutputFormat(FormatKind.DEFAULT, streaming=False)
    output_path: Optional[Path] = None
    timeout: float = 600.0
    no_exit: bool = False
    verbosity: int = 0
    catalog_path: Optional[Path] = None
    env_override: bool = False
    fail_on: Optional[Severity] = None
    build_dirs: tuple[str, ...] = DEFAULT_BUILD_OUTPUT_SUBTREES
    enum_kind: Optional[str] = None
    flag_summary: tuple[str, ...] = ()


_VALUE_FLAGS = {"--in", "--format", "--out", "--timeout", "--catalog",
                "--enum", "--verbosity", "--fail-on"}
_LIST_FLAGS = {"--paths", "--deps", "--build-dirs"}
_BARE_FLAGS = {"--stream", "--noexit", "--env-override", "--check-env"}
_ALL_FLAGS = _VALUE_FLAGS | _LIST_FLAGS | _BARE_FLAGS

_SCAN_ONLY_FLAGS = {"--in", "--paths", "--deps", "--format", "--stream", "--out",
                    "--timeout", "--catalog", "--fail-on", "--build-dirs"}

ENUM_KINDS = ("source-types", "formats", "exit-codes")


def _tokenize(argv: list[str]) -> dict:
    """First pass: trim blank tokens, group values under their flags."""
    tokens = [t for t in argv if t is not None and t.strip() != ""]
    seen: dict[str, list[str]] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ArgumentValidationError(
                "UnknownFlag", f"unexpected argument {tok!r}; flags start with --"
            )
        if tok not in _ALL_FLAGS:
            raise ArgumentValidationError("UnknownFlag", f"unknown flag {tok!r}")
        if tok in seen:
            raise ArgumentValidationError(
                "ConflictingFlags", f"{tok} given more than once"
            )
        i += 1
        if tok in _BARE_FLAGS:
            seen[tok] = []
            continue
        values: list[str] = []
        while i < len(tokens) and not tokens[i].startswith("--"):
            values.append(tokens[i])
            i += 1
            if tok in _VALUE_FLAGS:
                break
        if not values:
            raise ArgumentValidationError(
                "InvalidValue", f"{tok} needs a value but none was given"
            )
        seen[tok] = values
    return seen


def _check_input_extensions(source_type: SourceType, paths: list[str]) -> None:
    expected = _INPUT_EXTENSIONS[source_type]
    if expected is None:
        return
    for p in paths:
        suffix = Path(p).suffix.lower()
        if suffix not in expected:
            raise ArgumentValidationError(
                "ExtensionMismatch",
                f"input {p!r} has extension {suffix or '(none)'!r} but "
                f"--in {source_type.value} expects {'/'.join(expected)}",
            )


def parse_args(argv: list[str]) -> ScanConfig:
    """Validate argv into a ScanConfig, or raise ArgumentValidationError.

    Blank tokens are trimmed first; all chained dependencies between
    flags are checked here, so a returned config is ready to run.
    """
    seen = _tokenize(list(argv))
    summary = []
    for flag in ("--in", "--paths", "--deps", "--format", "--stream", "--out",
                 "--timeout", "--noexit", "--env-override", "--catalog",
                 "--enum", "--check-env", "--verbosity", "--fail-on",
                 "--build-dirs"):
        if flag in seen:
            values = seen[flag]
            summary.append(flag if not values else f"{flag} {' '.join(values)}")

    config = ScanConfig(flag_summary=tuple(summary))

    if "--verbosity" in seen:
        raw = seen["--verbosity"][0]
        try:
            level = int(raw)
        except ValueError:
            raise ArgumentValidationError(
                "InvalidValue", f"--verbosity {raw!r} is not an integer"
            ) from None
        if not 0 <= level <= 3:
            raise ArgumentValidationError(
                "InvalidValue", f"--verbosity {level} outside 0..3"
            )
        config.verbosity = level
    if "--noexit" in seen:
        config.no_exit = True
    if "--env-override" in seen:
        config.env_override = True

    modal = [f for f in ("--enum", "--check-env") if f in seen]
    if len(modal) == 2:
        raise ArgumentValidationError(
            "ConflictingFlags", "--enum and --check-env are exclusive modes"
        )
    if modal:
        extras = sorted(_SCAN_ONLY_FLAGS & set(seen))
        if extras:
            raise ArgumentValidationError(
                "ConflictingFlags",
                f"{modal[0]} cannot be combined with scan flags: {', '.join(extras)}"
            )
        if modal[0] == "--check-env":
            config.mode = Mode.CHECK_ENV
            return config
        kind = seen["--enum"][0]
        if kind not in ENUM_KINDS:
            raise ArgumentValidationError(
                "InvalidValue",
                f"--enum {kind!r} is not one of {', '.join(ENUM_KINDS)}"
            )
        config.mode = Mode.ENUM
        config.enum_kind = kind
        return config

    # scan mode: chained validation
    if "--in" not in seen:
        raise ArgumentValidationError(
            "MissingRequired", "--in <type> is required for a scan "
            "(chain: scan -> --in); see --enum source-types"
        )
    raw_type = seen["--in"][0]
    source_type = _SOURCE_TYPES.get(raw_type)
    if source_type is None:
        raise ArgumentValidationError(
            "InvalidValue",
            f"--in {raw_type!r} is not one of {', '.join(sorted(_SOURCE_TYPES))}"
        )
    config.source_type = source_type

    if "--paths" not in seen:
        raise ArgumentValidationError(
            "MissingRequired",
            f"--paths <p...> is required (chain: --in {raw_type} -> --paths)"
        )
    _check_input_extensions(source_type, seen["--paths"])
    config.input_paths = tuple(seen["--paths"])
    config.dependency_paths = tuple(seen.get("--deps", ()))
    if "--build-dirs" in seen:
        config.build_dirs = tuple(seen["--build-dirs"])

    kind_name = seen["--format"][0] if "--format" in seen else FormatKind.DEFAULT.value
    format_kind = _FORMAT_KINDS.get(kind_name)
    if format_kind is None:
        raise ArgumentValidationError(
            "InvalidValue",
            f"--format {kind_name!r} is not one of {', '.join(sorted(_FORMAT_KINDS))}"
        )
    streaming = "--stream" in seen
    config.format = OutputFormat(format_kind, streaming)

    if "--out" in seen:
        out = Path(seen["--out"][0])
        expected = EXTENSIONS[format_kind]
        if out.suffix.lower() != expected:
            raise ArgumentValidationError(
                "ExtensionMismatch",
                f"--out {str(out)!r} has extension {out.suffix or '(none)'!r} but "
                f"--format {kind_name} expects {expected} "
                f"(chain: --format -> --out extension)"
            )
        config.output_path = out
    elif streaming:
        raise ArgumentValidationError(
            "MissingRequired",
            "--stream requires --out <file> (chain: --stream -> --out); a "
            "terminal sink cannot be schema-validated afterwards"
        )

    if "--timeout" in seen:
        raw = seen["--timeout"][0]
        try:
            timeout = float(raw)
        except ValueError:
            raise ArgumentValidationError(
                "InvalidValue", f"--timeout {raw!r} is not a number of seconds"
            ) from None
        if not timeout > 0:
            raise ArgumentValidationError(
                "InvalidValue", f"--timeout {timeout} must be positive"
            )
        config.timeout = timeout

    if "--fail-on" in seen:
        raw = seen["--fail-on"][0]
        severity = _SEVERITIES.get(raw)
        if severity is None:
            raise ArgumentValidationError(
                "InvalidValue",
                f"--fail-on {raw!r} is not one of {', '.join(_SEVERITIES)}"
            )
        config.fail_on = severity

    if "--catalog" in seen:
        config.catalog_path = Path(seen["--catalog"][0])
    return config


@dataclass(frozen=True)
class EnvEntry:
    name: str
    value: Optional[str]
    description: str
    instruction: str

    @property
    def is_set(self) -> bool:
        return bool(self.value)


@dataclass(frozen=True)
class EnvReport:
    entries: tuple[EnvEntry, ...]

    @property
    def ok(self) -> bool:
        return all(e.is_set for e in self.entries)


def check_environment() -> EnvReport:
    """Report the three required variables as set or unset, each with a
    ready-to-use setting instruction."""
    entries = []
    for name, description, example in ENV_REQUIREMENTS:
        value = os.environ.get(name) or None
        entries.append(EnvEntry(
            name=name,
            value=value,
            description=description,
            instruction=f'export {name}="{example}"',
        ))
    return EnvReport(tuple(entries))


def render_env_report(report: EnvReport) -> str:
    lines = []
    for e in report.entries:
        if e.is_set:
            lines.append(f"ok: {e.name}={e.value}")
        else:
            lines.append(f"unset: {e.name} ({e.description}); set with: {e.instruction}")
    return "\n".join(lines)


def enumerate_help(kind: str) -> str:
    """One of the three enumeration listings, deterministically ordered."""
    if kind == "source-types":
        rows = []
        for name, st in _SOURCE_TYPES.items():
            exts = _INPUT_EXTENSIONS[st]
            shape = "/".join(exts) if exts else "directory"
            rows.append(f"{st.name.lower().replace('_', '-'):<14} --in {name:<8} {shape}")
        return "\n".join(sorted(rows))
    if kind == "formats":
        rows = [
            f"{kind_name:<8} --format {kind_name:<8} {EXTENSIONS[k]}"
            for kind_name, k in sorted(_FORMAT_KINDS.items())
        ]
        return "\n".join(rows)
    if kind == "exit-codes":
        return "\n".join(f"{code}  {meaning}" for code, meaning in EXIT_CODE_TABLE)
    raise ArgumentValidationError(
        "UnknownKind", f"unknown enumeration kind {kind!r}; "
        f"choose from {', '.join(ENUM_KINDS)}"
    )


def _severity_at_least(severity: Severity, threshold: Severity) -> bool:
    order = {Severity.HIGH: 3, Severity.MEDIUM: 2, Severity.LOW: 1}
    return order[severity] >= order[threshold]


def run_scan(config: ScanConfig, clock=None) -> int:
    """Execute intake -> criteria -> slices -> rules -> output session.

    Returns an exit code; the wall-clock timeout abandons in-flight
    work, closes the session with a truncation note, and returns the
    timeout code.
    """
    deadline = Deadline(config.timeout)
    try:
        catalog = load_catalog(config.catalog_path)
    except (CatalogError, OSError) as exc:
        print(f"catalog error: {exc}", file=sys.stderr)
        return EXIT_ARGS

    sink = None
    opened = False
    try:
        if config.output_path is not None:
            sink = open(config.output_path, "wb")
            opened = True
        else:
            sink = sys.stdout.buffer
        session = start_analyzing(config, sink, clock=clock)
    except OSError as exc:
        print(f"cannot open output: {exc}", file=sys.stderr)
        if opened and sink is not None:
            sink.close()
        return EXIT_ARGS

    timed_out = False
    intake_problem: Optional[str] = None
    unknown_slices = 0
    max_severity: Optional[Severity] = None
    total = 0
    entry_errors: list[tuple[str, str]] = []
    try:
        try:
            deps = list(config.dependency_paths) + [
                str(p) for p in resolve_dependency_dirs()
            ]
            scan_set = assemble_scan_set(
                config.source_type,
                [Path(p) for p in config.input_paths],
                deps=[Path(d) for d in deps],
                build_dirs=config.build_dirs,
                cancel=deadline.check,
                on_error=lambda name, exc: entry_errors.append((name, str(exc))),
            )
            rules = rules_from_catalog(catalog)
            index = IrIndex(scan_set)
            criteria = find_criteria(scan_set, catalog)
            if config.verbosity >= 1:
                print(f"scanning {len(scan_set.classes)} classes, "
                      f"{len(criteria)} call sites", file=sys.stderr)

            by_class: dict[str, list] = {}
            for criterion in criteria:
                by_class.setdefault(criterion.owner_fqn, []).append(criterion)
            for fqn in sorted(by_class):
                deadline.check()
                class_criteria = by_class[fqn]
                slices = [backward_slice(c, index) for c in class_criteria]
                unknown_slices += sum(
                    1 for s in slices
                    if any(isinstance(r, Unknown) for r in s.resolved_args.values())
                )
                findings = run_rules(scan_set, class_criteria, slices, rules,
                                     start_id=total)
                for bug in findings:
                    session.add_issue(bug)
                    if max_severity is None or _severity_at_least(bug.severity,
                                                                  max_severity):
                        max_severity = bug.severity
                total += len(findings)
        except ScanTimeout:
            timed_out = True
        except (IntakeError, ClassFileError) as exc:
            intake_problem = str(exc)

        session.record_unknown_slices(unknown_slices)
        if timed_out:
            session.mark_truncated()
        stop_analyzing(session)
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    finally:
        if opened and sink is not None:
            sink.close()

    for name, message in entry_errors[:20]:
        print(f"warning: skipped unparseable entry {name}: {message}",
              file=sys.stderr)
    if len(entry_errors) > 20:
        print(f"warning: ... and {len(entry_errors) - 20} more unparseable entries",
              file=sys.stderr)
    if intake_problem is not None:
        print(f"input error: {intake_problem}", file=sys.stderr)
        return EXIT_ARGS
    if timed_out:
        print(f"scan abandoned after {config.timeout} s; output truncated",
              file=sys.stderr)
        return EXIT_TIMEOUT
    if config.verbosity >= 1:
        print(f"{total} finding(s)", file=sys.stderr)
    if (config.fail_on is not None and max_severity is not None
            and _severity_at_least(max_severity, config.fail_on)):
        return EXIT_FINDINGS
    return EXIT_OK


def _dispatch(argv: list[str]) -> tuple[int, bool]:
    try:
        config = parse_args(argv)
    except ArgumentValidationError as exc:
        print(f"argument error [{exc.kind}]: {exc}", file=sys.stderr)
        return EXIT_ARGS, False

    if config.mode is Mode.CHECK_ENV:
        report = check_environment()
        print(render_env_report(report))
        return (EXIT_OK if report.ok else EXIT_ENV), config.no_exit

    if config.mode is Mode.ENUM:
        try:
            print(enumerate_help(config.enum_kind))
        except ArgumentValidationError as exc:
            print(f"argument error [{exc.kind}]: {exc}", file=sys.stderr)
            return EXIT_ARGS, config.no_exit
        return EXIT_OK, config.no_exit

    report = check_environment()
    if not report.ok:
        if not config.env_override:
            print("environment not ready; scan refused:", file=sys.stderr)
            print(render_env_report(report), file=sys.stderr)
            print("(use --env-override to proceed anyway)", file=sys.stderr)
            return EXIT_ENV, config.no_exit
        print("warning: proceeding with unset environment variables "
              "(--env-override)", file=sys.stderr)

    try:
        return run_scan(config), config.no_exit
    except Exception as exc:  # never leak a crash as a traceback exit
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL, config.no_exit


def main(argv: Optional[list[str]] = None) -> int:
    """Entry point. With --noexit the process-terminating call is
    skipped and the exit code is returned, so a host can run scans
    repeatedly in one interpreter."""
    code, no_exit = _dispatch(sys.argv[1:] if argv is None else list(argv))
    if not no_exit:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
