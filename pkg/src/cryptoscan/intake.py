"""Routing of scan inputs into an explicit scan set.

Four input kinds are supported: zip archives of classes, project
directories with conventional build output, loose compiled classes,
and loose source files (which must have compiled siblings). Inputs are
recorded explicitly so sibling files in the same directories are never
swept into the scan.
"""

from __future__ import annotations

import codecs
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, TextIO

from .classfile import (
    ClassFile,
    ClassFileError,
    enumerate_archive_classes,
    fully_qualified_name,
    parse_class_file,
)


class IntakeError(Exception):
    """Base class for scan-set assembly failures."""


class Unreadable(IntakeError):
    """File could not be opened or decoded."""


class NotASourceFile(IntakeError):
    """Path does not carry the source-file extension."""


class MalformedPackageDecl(IntakeError):
    """A package keyword without a well-formed terminated declaration."""


class MixedInputKinds(IntakeError):
    """Loose inputs of more than one kind in a single scan."""


class ExtensionMismatch(IntakeError):
    """Input extension inconsistent with the declared source type."""


class EmptyScanSet(IntakeError):
    """Assembly produced nothing to scan."""


class MissingInput(IntakeError):
    """A named input or dependency path does not exist."""


class MissingCompiledClass(IntakeError):
    """A source input has no matching compiled class beside it."""


class SourceType(Enum):
    ARCHIVE = "archive"
    PROJECT_DIR = "dir"
    CLASS_FILES = "class"
    SOURCE_FILES = "source"


class BuildTool(Enum):
    MAVEN = "maven"
    GRADLE = "gradle"


# Default per-user dependency caches, one row per supported build tool:
# (tool, override environment variable, path parts under the home dir).
DEPENDENCY_CACHE_TABLE = (
    (BuildTool.MAVEN, "CRYPTOSCAN_MAVEN_CACHE", (".m2", "repository")),
    (BuildTool.GRADLE, "CRYPTOSCAN_GRADLE_CACHE",
     (".gradle", "caches", "modules-2", "files-2.1")),
)

# Conventional compiled-output subtrees checked under a project directory.
DEFAULT_BUILD_OUTPUT_SUBTREES = ("target/classes", "build/classes")

_KIND_EXTENSIONS = {
    SourceType.ARCHIVE: (".jar", ".zip"),
    SourceType.CLASS_FILES: (".class",),
    SourceType.SOURCE_FILES: (".java",),
}


@dataclass(frozen=True)
class ScanSet:
    """Fully resolved inputs for one scan. Immutable once built."""

    source_type: SourceType
    classes: tuple[ClassFile, ...]
    sources: tuple[tuple[Path, str], ...]
    class_path_entries: tuple[str, ...]
    dependency_dirs: tuple[Path, ...]


def _is_identifier_char(c: str) -> bool:
    return c.isalnum() or c in "_$"


def fqn_from_stream(stream: TextIO, basename: str) -> str:
    """Derive the fully qualified name from an open source-text stream.

    Reads one character at a time and stops the moment the decision is
    made: after the package declaration's semicolon, or as soon as the
    first significant token is known not to be a package declaration.
    """
    def read1() -> str:
        return stream.read(1)

    def next_significant() -> str:
        # Returns the next character outside comments and whitespace,
        # or '' at end of input.
        while True:
            c = read1()
            if c == "":
                return ""
            if c.isspace() or c == "﻿":
                continue
            if c == "/":
                c2 = read1()
                if c2 == "/":
                    while True:
                        c3 = read1()
                        if c3 == "" or c3 == "\n":
                            break
                    continue
                if c2 == "*":
                    prev = ""
                    while True:
                        c3 = read1()
                        if c3 == "":
                            return ""
                        if prev == "*" and c3 == "/":
                            break
                        prev = c3
                    continue
                return c  # a bare slash cannot start a package declaration
            return c

    c = next_significant()
    if c == "" or not (c.isalpha() or c in "_$"):
        return basename

    token = [c]
    terminator = ""
    while True:
        c = read1()
        if c == "" or not _is_identifier_char(c):
            terminator = c
            break
        token.append(c)
        if len(token) > 7:  # longer than "package": cannot be the keyword
            return basename

    if "".join(token) != "package":
        return basename
    if terminator == "":
        raise MalformedPackageDecl(f"{basename}: 'package' at end of file")

    name: list[str] = []
    c = terminator
    while True:
        if c == "":
            raise MalformedPackageDecl(
                f"{basename}: package declaration not terminated by ';'"
            )
        if c == ";":
            break
        if c == "/":
            # comments may appear inside the declaration
            c2 = read1()
            if c2 == "/":
                while True:
                    c3 = read1()
                    if c3 == "" or c3 == "\n":
                        break
            elif c2 == "*":
                prev = ""
                while True:
                    c3 = read1()
                    if c3 == "":
                        raise MalformedPackageDecl(
                            f"{basename}: unterminated comment in package declaration"
                        )
                    if prev == "*" and c3 == "/":
                        break
                    prev = c3
            else:
                raise MalformedPackageDecl(
                    f"{basename}: unexpected '/' in package declaration"
                )
        elif not c.isspace():
            name.append(c)
        c = read1()

    package = "".join(name)
    if not package or package.startswith(".") or package.endswith(".") or ".." in package:
        raise MalformedPackageDecl(f"{basename}: malformed package name {package!r}")
    return f"{package}.{basename}"


class _IncrementalTextReader:
    """Character-at-a-time UTF-8 view over a binary stream.

    Decodes only the bytes actually consumed, so garbage past the
    point where reading stops is never touched.
    """

    def __init__(self, raw):
        self._raw = raw
        self._decoder = codecs.getincrementaldecoder("utf-8")()

    def read(self, n: int = 1) -> str:
        out = []
        for _ in range(n):
            ch = ""
            while not ch:
                b = self._raw.read(1)
                if not b:
                    ch = self._decoder.decode(b"", final=True)
                    break
                ch = self._decoder.decode(b)
            if not ch:
                break
            out.append(ch)
        return "".join(out)


def fqn_from_source(path: Path) -> str:
    """Fully qualified name of a .java file, from its package declaration.

    Reads only as far as needed: comments and blank space are skipped,
    and input ends at the package declaration's semicolon (or at the
    first token that rules a declaration out).
    """
    path = Path(path)
    if path.suffix != ".java":
        raise NotASourceFile(f"{path}: expected .java")
    basename = path.stem
    try:
        with open(path, "rb") as raw:
            return fqn_from_stream(_IncrementalTextReader(raw), basename)
    except (OSError, UnicodeDecodeError) as exc:
        raise Unreadable(f"{path}: {exc}") from None


def resolve_dependency_dirs(build_tool_hint: Optional[BuildTool] = None) -> list[Path]:
    """Existing per-user dependency caches, resolved at call time.

    Missing directories are silently omitted; the result order follows
    DEPENDENCY_CACHE_TABLE.
    """
    out: list[Path] = []
    for tool, env_var, parts in DEPENDENCY_CACHE_TABLE:
        if build_tool_hint is not None and tool is not build_tool_hint:
            continue
        override = os.environ.get(env_var)
        path = Path(override) if override else Path.home().joinpath(*parts)
        if path.is_dir():
            out.append(path)
    return out


def _implied_kind(path: Path) -> Optional[SourceType]:
    if path.is_dir():
        return SourceType.PROJECT_DIR
    for kind, exts in _KIND_EXTENSIONS.items():
        if path.suffix in exts:
            return kind
    return None


def _check_input_kinds(source_type: SourceType, inputs: list[Path]) -> None:
    implied = []
    for path in inputs:
        kind = _implied_kind(path)
        if kind is None:
            expected = _KIND_EXTENSIONS.get(source_type)
            wanted = "/".join(expected) if expected else "a directory"
            raise ExtensionMismatch(
                f"{path}: extension {path.suffix!r} does not match any input "
                f"kind (source type {source_type.value!r} wants {wanted})"
            )
        implied.append(kind)
    distinct = set(implied)
    if len(distinct) > 1:
        raise MixedInputKinds(
            f"inputs mix {', '.join(sorted(k.value for k in distinct))}; "
            f"exactly one kind per scan"
        )
    actual = distinct.pop()
    if actual is not source_type:
        expected = _KIND_EXTENSIONS.get(source_type)
        wanted = "/".join(expected) if expected else "a directory"
        raise ExtensionMismatch(
            f"inputs look like {actual.value!r} but source type is "
            f"{source_type.value!r} (expected {wanted})"
        )


def _validate_fqn(fqn: str, origin: Path) -> str:
    if not fqn or "/" in fqn or "\\" in fqn:
        raise IntakeError(f"{origin}: derived name {fqn!r} is not a dotted name")
    return fqn


def assemble_scan_set(
    source_type: SourceType,
    inputs: list[Path],
    deps: list[Path] = (),
    build_dirs: tuple[str, ...] = DEFAULT_BUILD_OUTPUT_SUBTREES,
    cancel: Optional[Callable[[], None]] = None,
    on_error: Optional[Callable[[str, ClassFileError], None]] = None,
) -> ScanSet:
    """Resolve the requested inputs into an explicit ScanSet.

    Only the named inputs enter the scan; sibling files are never
    discovered by walking. `cancel` is polled at file boundaries.
    """
    inputs = [Path(p) for p in inputs]
    if not inputs:
        raise EmptyScanSet("no inputs given")
    for path in inputs:
        if not path.exists():
            raise MissingInput(f"input does not exist: {path}")
    _check_input_kinds(source_type, inputs)

    dep_dirs: list[Path] = []
    for dep in deps:
        dep = Path(dep)
        if not dep.is_dir():
            raise MissingInput(f"dependency directory does not exist: {dep}")
        dep_dirs.append(dep)

    classes: list[ClassFile] = []
    sources: list[tuple[Path, str]] = []
    entries: list[str] = []

    if source_type is SourceType.ARCHIVE:
        for arc in inputs:
            classes.extend(enumerate_archive_classes(arc, on_error=on_error, cancel=cancel))
            entries.append(str(arc))
    elif source_type is SourceType.CLASS_FILES:
        for path in inputs:
            if cancel is not None:
                cancel()
            cf = parse_class_file(path.read_bytes(), origin=path)
            classes.append(cf)
            entries.append(_validate_fqn(fully_qualified_name(cf), path))
    elif source_type is SourceType.SOURCE_FILES:
        for path in inputs:
            if cancel is not None:
                cancel()
            fqn = _validate_fqn(fqn_from_source(path), path)
            sibling = path.with_suffix(".class")
            if not sibling.is_file():
                raise MissingCompiledClass(
                    f"{path}: no compiled class {sibling.name} beside it "
                    f"(sources are scanned through their compiled form)"
                )
            cf = parse_class_file(sibling.read_bytes(), origin=sibling)
            compiled_fqn = fully_qualified_name(cf)
            if compiled_fqn != fqn:
                raise MissingCompiledClass(
                    f"{path}: declared name {fqn} but {sibling.name} "
                    f"compiles to {compiled_fqn}"
                )
            classes.append(cf)
            sources.append((path, fqn))
            entries.append(fqn)
    else:  # PROJECT_DIR
        for project in inputs:
            for sub in build_dirs:
                root = project / sub
                if not root.is_dir():
                    continue
                for path in sorted(root.rglob("*.class")):
                    if cancel is not None:
                        cancel()
                    try:
                        cf = parse_class_file(path.read_bytes(), origin=path)
                    except ClassFileError as exc:
                        if on_error is not None:
                            on_error(str(path), exc)
                        continue
                    classes.append(cf)
                    entries.append(_validate_fqn(fully_qualified_name(cf), path))

    if not classes:
        raise EmptyScanSet(
            f"no classes to scan under {', '.join(str(p) for p in inputs)}"
        )
    return ScanSet(
        source_type=source_type,
        classes=tuple(classes),
        sources=tuple(sources),
        class_path_entries=tuple(entries),
        dependency_dirs=tuple(dep_dirs),
    )
