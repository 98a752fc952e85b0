"""Tests for scan-set assembly and source-name derivation."""

import io
import random
import re
import zipfile

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryptoscan.classfile import fully_qualified_name
from cryptoscan.intake import (
    BuildTool,
    EmptyScanSet,
    ExtensionMismatch,
    MalformedPackageDecl,
    MissingCompiledClass,
    MissingInput,
    MixedInputKinds,
    NotASourceFile,
    SourceType,
    Unreadable,
    assemble_scan_set,
    fqn_from_source,
    fqn_from_stream,
    resolve_dependency_dirs,
)

from classbuilder import ClassBuilder


def _reference_first_token(text: str) -> str:
    """Independent oracle: strip comments with a reference grammar and
    return the first token of what remains."""
    stripped = re.sub(r"/\*.*?\*/", " ", text, flags=re.DOTALL)
    stripped = re.sub(r"//[^\n]*", " ", stripped)
    tokens = stripped.split()
    return tokens[0] if tokens else ""


def _reference_fqn(text: str, basename: str) -> str:
    stripped = re.sub(r"/\*.*?\*/", " ", text, flags=re.DOTALL)
    stripped = re.sub(r"//[^\n]*", " ", stripped)
    stripped = stripped.lstrip()
    if re.match(r"package[^\w$]", stripped):
        decl = stripped[len("package"):stripped.index(";")]
        return f"{''.join(decl.split())}.{basename}"
    return basename


class CountingReader(io.StringIO):
    """Text stream that records how many characters were consumed."""

    def __init__(self, text):
        super().__init__(text)
        self.consumed = 0

    def read(self, n=-1):
        chunk = super().read(n)
        self.consumed += len(chunk)
        return chunk


class TestFqnFromSource:
    def test_header_comment_then_package(self, tmp_path):
        path = tmp_path / "Foo.java"
        path.write_text("/* hdr */\npackage com.a.b;\npublic class Foo {}\n")
        assert fqn_from_source(path) == "com.a.b.Foo"

    def test_default_package(self, tmp_path):
        path = tmp_path / "Bar.java"
        path.write_text("import x.Y;\npublic class Bar {}\n")
        assert fqn_from_source(path) == "Bar"

    def test_line_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "Baz.java"
        path.write_text("// copyright\n\n   \n// more\npackage p.q;\nclass Baz {}\n")
        assert fqn_from_source(path) == "p.q.Baz"

    def test_ten_thousand_line_block_comment(self, tmp_path):
        # Expected value computed with the reference comment-stripping
        # grammar, not with the code under test.
        body = "/*\n" + ("filler line\n" * 10_000) + "*/\npackage p;\nclass Big {}\n"
        path = tmp_path / "Big.java"
        path.write_text(body)
        assert _reference_fqn(body, "Big") == "p.Big"
        assert fqn_from_source(path) == "p.Big"

    def test_comment_inside_declaration(self, tmp_path):
        path = tmp_path / "C.java"
        path.write_text("package /* why */ com. /* again */ d;\nclass C {}\n")
        assert fqn_from_source(path) == "com.d.C"

    def test_wrong_extension(self, tmp_path):
        path = tmp_path / "Foo.txt"
        path.write_text("package p;")
        with pytest.raises(NotASourceFile):
            fqn_from_source(path)

    def test_unreadable(self, tmp_path):
        with pytest.raises(Unreadable):
            fqn_from_source(tmp_path / "Missing.java")

    def test_invalid_utf8_is_unreadable(self, tmp_path):
        path = tmp_path / "Bad.java"
        path.write_bytes(b"package p;\x80\xff")
        # the bad bytes sit after the semicolon, so they are never read
        assert fqn_from_source(path) == "p.Bad"
        path.write_bytes(b"pack\x80age p;")
        with pytest.raises(Unreadable):
            fqn_from_source(path)

    def test_missing_semicolon(self, tmp_path):
        path = tmp_path / "NoSemi.java"
        path.write_text("package p.q.r")
        with pytest.raises(MalformedPackageDecl):
            fqn_from_source(path)

    def test_empty_package_name(self, tmp_path):
        path = tmp_path / "Empty.java"
        path.write_text("package ;")
        with pytest.raises(MalformedPackageDecl):
            fqn_from_source(path)

    def test_identifier_starting_with_package_is_not_keyword(self, tmp_path):
        path = tmp_path / "T.java"
        path.write_text("packagefoo bar;\nclass T {}\n")
        assert fqn_from_source(path) == "T"

    def test_fail_fast_stops_at_semicolon(self):
        text = "/* c */ package a.b; " + "x" * 5000
        reader = CountingReader(text)
        assert fqn_from_stream(reader, "F") == "a.b.F"
        assert reader.consumed <= text.index(";") + 1

    def test_fail_fast_non_package_file(self):
        text = "import java.util.List; " + "y" * 5000
        reader = CountingReader(text)
        assert fqn_from_stream(reader, "G") == "G"
        # decision falls at the first token; nothing close to the tail is read
        assert reader.consumed < 30

    @given(
        lead_comment=st.sampled_from(["", "// line comment\n", "/* block */\n",
                                      "/* multi\nline\n*/\n", "\n\n  \n"]),
        package=st.one_of(
            st.none(),
            st.lists(
                st.text(alphabet="abcdefgz", min_size=1, max_size=6),
                min_size=1, max_size=4,
            ).map(".".join),
        ),
        trailer=st.sampled_from(["class X {}", "import a.B;", "@interface Y {}"]),
    )
    @settings(max_examples=150, deadline=None)
    def test_agreement_property(self, lead_comment, package, trailer):
        decl = f"package {package};\n" if package else ""
        text = f"{lead_comment}{decl}{trailer}\n"
        expected = _reference_fqn(text, "Prop")
        assert fqn_from_stream(io.StringIO(text), "Prop") == expected

    def test_agreement_with_reference_grammar(self):
        rng = random.Random(7)
        samples = []
        for i in range(60):
            parts = []
            if rng.random() < 0.5:
                parts.append("/* block %s */\n" % ("x" * rng.randrange(0, 40)))
            if rng.random() < 0.5:
                parts.append("// line\n")
            if rng.random() < 0.7:
                parts.append(f"package p{i}.q{rng.randrange(9)};\n")
            parts.append("public class S%d {}\n" % i)
            samples.append("".join(parts))
        for i, text in enumerate(samples):
            expected = _reference_fqn(text, f"S{i}")
            assert fqn_from_stream(io.StringIO(text), f"S{i}") == expected


class TestAssembleScanSet:
    def _write_class(self, directory, internal_name):
        path = directory / (internal_name.rsplit("/", 1)[-1] + ".class")
        path.write_bytes(ClassBuilder(internal_name).build())
        return path

    def test_class_files_two_inputs(self, tmp_path):
        a = self._write_class(tmp_path, "p/A")
        b = self._write_class(tmp_path, "p/B")
        scan = assemble_scan_set(SourceType.CLASS_FILES, [a, b])
        assert len(scan.classes) == 2
        assert scan.class_path_entries == ("p.A", "p.B")

    def test_isolation_from_siblings(self, tmp_path):
        requested = [self._write_class(tmp_path, f"p/R{i}") for i in range(3)]
        for i in range(5):
            self._write_class(tmp_path, f"p/Sibling{i}")
        scan = assemble_scan_set(SourceType.CLASS_FILES, requested)
        names = {fully_qualified_name(c) for c in scan.classes}
        assert names == {"p.R0", "p.R1", "p.R2"}

    def test_isolation_property_random_layouts(self, tmp_path):
        rng = random.Random(99)
        for trial in range(20):
            root = tmp_path / f"trial{trial}"
            root.mkdir()
            n = rng.randrange(1, 5)
            m = rng.randrange(0, 6)
            requested = [self._write_class(root, f"t{trial}/R{i}") for i in range(n)]
            for i in range(m):
                self._write_class(root, f"t{trial}/S{i}")
            scan = assemble_scan_set(SourceType.CLASS_FILES, requested)
            assert {fully_qualified_name(c) for c in scan.classes} == {
                f"t{trial}.R{i}" for i in range(n)
            }

    def test_archive(self, tmp_path):
        arc = tmp_path / "app.jar"
        with zipfile.ZipFile(arc, "w") as zf:
            zf.writestr("q/X.class", ClassBuilder("q/X").build())
            zf.writestr("q/Y.class", ClassBuilder("q/Y").build())
        scan = assemble_scan_set(SourceType.ARCHIVE, [arc])
        assert len(scan.classes) == 2
        assert scan.class_path_entries == (str(arc),)

    def test_project_dir(self, tmp_path):
        project = tmp_path / "proj"
        out = project / "target" / "classes" / "com" / "e"
        out.mkdir(parents=True)
        (out / "M.class").write_bytes(ClassBuilder("com/e/M").build())
        stray = project / "src"
        stray.mkdir()
        (stray / "Stray.class").write_bytes(ClassBuilder("Stray").build())
        scan = assemble_scan_set(SourceType.PROJECT_DIR, [project])
        assert [fully_qualified_name(c) for c in scan.classes] == ["com.e.M"]

    def test_project_dir_gradle_output(self, tmp_path):
        project = tmp_path / "proj"
        out = project / "build" / "classes" / "java" / "main"
        out.mkdir(parents=True)
        (out / "G.class").write_bytes(ClassBuilder("G").build())
        scan = assemble_scan_set(SourceType.PROJECT_DIR, [project])
        assert [fully_qualified_name(c) for c in scan.classes] == ["G"]

    def test_project_dir_empty(self, tmp_path):
        project = tmp_path / "empty"
        project.mkdir()
        with pytest.raises(EmptyScanSet):
            assemble_scan_set(SourceType.PROJECT_DIR, [project])

    def test_extension_mismatch(self, tmp_path):
        src = tmp_path / "A.java"
        src.write_text("class A {}")
        with pytest.raises(ExtensionMismatch):
            assemble_scan_set(SourceType.CLASS_FILES, [src])

    def test_mixed_kinds(self, tmp_path):
        a = self._write_class(tmp_path, "A")
        j = tmp_path / "B.java"
        j.write_text("class B {}")
        with pytest.raises(MixedInputKinds):
            assemble_scan_set(SourceType.CLASS_FILES, [a, j])

    def test_missing_input(self, tmp_path):
        with pytest.raises(MissingInput):
            assemble_scan_set(SourceType.CLASS_FILES, [tmp_path / "Nope.class"])

    def test_no_inputs(self):
        with pytest.raises(EmptyScanSet):
            assemble_scan_set(SourceType.CLASS_FILES, [])

    def test_source_files_require_compiled_sibling(self, tmp_path):
        src = tmp_path / "W.java"
        src.write_text("package w;\nclass W {}\n")
        with pytest.raises(MissingCompiledClass):
            assemble_scan_set(SourceType.SOURCE_FILES, [src])
        (tmp_path / "W.class").write_bytes(ClassBuilder("w/W").build())
        scan = assemble_scan_set(SourceType.SOURCE_FILES, [src])
        assert scan.sources == ((src, "w.W"),)
        assert scan.class_path_entries == ("w.W",)

    def test_source_files_fqn_mismatch(self, tmp_path):
        src = tmp_path / "V.java"
        src.write_text("package expected;\nclass V {}\n")
        (tmp_path / "V.class").write_bytes(ClassBuilder("other/V").build())
        with pytest.raises(MissingCompiledClass):
            assemble_scan_set(SourceType.SOURCE_FILES, [src])

    def test_fqn_agreement_source_vs_class(self, tmp_path):
        # compiled class and its source agree on the dotted name
        src = tmp_path / "Agree.java"
        src.write_text("/* x */ package com.pair;\nclass Agree {}\n")
        (tmp_path / "Agree.class").write_bytes(ClassBuilder("com/pair/Agree").build())
        scan = assemble_scan_set(SourceType.SOURCE_FILES, [src])
        assert fqn_from_source(src) == fully_qualified_name(scan.classes[0])

    def test_dependency_dirs_appended(self, tmp_path):
        a = self._write_class(tmp_path, "D")
        dep = tmp_path / "deps"
        dep.mkdir()
        scan = assemble_scan_set(SourceType.CLASS_FILES, [a], deps=[dep])
        assert scan.dependency_dirs == (dep,)

    def test_missing_dependency_dir(self, tmp_path):
        a = self._write_class(tmp_path, "E")
        with pytest.raises(MissingInput):
            assemble_scan_set(SourceType.CLASS_FILES, [a], deps=[tmp_path / "nope"])


class TestResolveDependencyDirs:
    def test_both_present_no_hint(self, tmp_path, monkeypatch):
        home = tmp_path / "home"
        maven = home / ".m2" / "repository"
        gradle = home / ".gradle" / "caches" / "modules-2" / "files-2.1"
        maven.mkdir(parents=True)
        gradle.mkdir(parents=True)
        monkeypatch.setenv("HOME", str(home))
        monkeypatch.delenv("CRYPTOSCAN_MAVEN_CACHE", raising=False)
        monkeypatch.delenv("CRYPTOSCAN_GRADLE_CACHE", raising=False)
        assert resolve_dependency_dirs() == [maven, gradle]

    def test_hint_filters(self, tmp_path, monkeypatch):
        home = tmp_path / "home"
        maven = home / ".m2" / "repository"
        maven.mkdir(parents=True)
        monkeypatch.setenv("HOME", str(home))
        monkeypatch.delenv("CRYPTOSCAN_MAVEN_CACHE", raising=False)
        assert resolve_dependency_dirs(BuildTool.MAVEN) == [maven]
        assert resolve_dependency_dirs(BuildTool.GRADLE) == []

    def test_nothing_present(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HOME", str(tmp_path / "blank"))
        monkeypatch.delenv("CRYPTOSCAN_MAVEN_CACHE", raising=False)
        monkeypatch.delenv("CRYPTOSCAN_GRADLE_CACHE", raising=False)
        assert resolve_dependency_dirs() == []

    def test_env_override(self, tmp_path, monkeypatch):
        cache = tmp_path / "custom-cache"
        cache.mkdir()
        monkeypatch.setenv("HOME", str(tmp_path / "nohome"))
        monkeypatch.setenv("CRYPTOSCAN_MAVEN_CACHE", str(cache))
        monkeypatch.delenv("CRYPTOSCAN_GRADLE_CACHE", raising=False)
        assert resolve_dependency_dirs(BuildTool.MAVEN) == [cache]
