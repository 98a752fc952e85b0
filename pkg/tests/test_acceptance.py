"""Acceptance suite: one test per acceptance criterion.

Each test prints one PASS line on success (run with -s to see them);
a pytest failure marks the criterion failed. Tolerances are asserted
exactly as stated, never loosened here.
"""

import io
import random
import string
import time
import xml.etree.ElementTree as ET
from datetime import datetime, timezone

import pytest

from cryptoscan.catalog import Severity
from cryptoscan.classfile import UnsupportedVersion, fully_qualified_name, parse_class_file
from cryptoscan.cli import (
    EXIT_TIMEOUT,
    ArgumentValidationError,
    Mode,
    parse_args,
    run_scan,
)
from cryptoscan.intake import fqn_from_source
from cryptoscan.output import (
    FormatKind,
    OutputFormat,
    add_issue,
    find_empty_elements,
    start_analyzing,
    stop_analyzing,
    validate_document,
)
from cryptoscan.rules import BugInstance

import corpus
from classbuilder import ClassBuilder


def _ok(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


FIXED_CLOCK = lambda: datetime(2026, 8, 10, 12, 0, 0, tzinfo=timezone.utc)


class _Config:
    # the scan request is held constant across the two handler paths;
    # only the handler (streaming flag) differs
    def __init__(self, kind, streaming):
        self.format = OutputFormat(kind, streaming)
        self.source_type = type("S", (), {"value": "class"})()
        self.input_paths = ("fixture.class",)
        self.flag_summary = ("--format " + kind.value,)


def _random_findings(rng, n):
    alphabet = string.ascii_letters + string.digits + " /.$<>()[];-_\"'&"
    out = []
    for i in range(n):
        out.append(BugInstance(
            id=i,
            rule_id=rng.choice(["ecb-mode", "broken-hash", "hardcoded-key",
                                "constant-iv", "cleartext-url", "constant-salt"]),
            class_fqn=f"p{rng.randrange(40)}.C{i}",
            method_signature=f"m{i}()V",
            bytecode_offset=rng.randrange(500),
            source_line=rng.choice([None, rng.randrange(1, 2000)]),
            message="".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 80))),
            severity=rng.choice(list(Severity)),
            evidence="".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 40))),
        ))
    return out


def _emit(kind, streaming, findings):
    sink = io.BytesIO()
    session = start_analyzing(_Config(kind, streaming), sink, clock=FIXED_CLOCK)
    for bug in findings:
        add_issue(session, bug)
    stop_analyzing(session)
    return sink.getvalue().decode("utf-8"), session


def _canonical_xml(text):
    def norm(node):
        return (node.tag, tuple(sorted(node.attrib.items())),
                (node.text or "").strip(), tuple(norm(c) for c in node))
    return norm(ET.fromstring(text))


@pytest.fixture(scope="module")
def randomized_suite():
    """100 randomized finding lists (0..500 findings), rendered through
    both handler paths in every format."""
    rng = random.Random(0xC0FFEE)
    suite = []
    for _ in range(100):
        findings = _random_findings(rng, rng.randrange(0, 501))
        rendered = {}
        for kind in FormatKind:
            streamed, _ = _emit(kind, True, findings)
            buffered, _ = _emit(kind, False, findings)
            rendered[kind] = (streamed, buffered)
        suite.append((findings, rendered))
    return suite


class TestAcceptance:
    def test_parser_roundtrip_50_file_corpus(self, tmp_path):
        started = time.monotonic()
        fixtures = corpus.roundtrip_corpus(50)
        assert len(fixtures) == 50
        errors = 0
        for package, cls, source, blob in fixtures:
            cf = parse_class_file(blob)
            expected = f"{package}.{cls}" if package else cls
            assert fully_qualified_name(cf) == expected
            # source agreement for the non-nested names
            if "$" not in cls:
                path = tmp_path / f"{cls}.java"
                path.write_text(source)
                assert fqn_from_source(path) == expected
        elapsed = time.monotonic() - started
        assert errors == 0
        assert elapsed < 5.0, f"round-trip took {elapsed:.2f}s"
        _ok(f"parser round-trip on 50-file corpus in {elapsed:.2f}s, 0 errors")

    def test_version_gate(self):
        with pytest.raises(UnsupportedVersion) as err:
            parse_class_file(ClassBuilder("gate/V53", major=53).build())
        assert err.value.major == 53
        cf = parse_class_file(ClassBuilder("gate/V52", major=52).build())
        assert cf.major_version == 52
        _ok("version gate: major 53 rejected with UnsupportedVersion, 52 accepted")

    def test_seeded_detection_recall_and_precision(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HOME", "/nonexistent-home")
        started = time.monotonic()
        seeded_dir = tmp_path / "seeded"
        seeded_dir.mkdir()
        paths = corpus.write_corpus_dir(seeded_dir, corpus.seeded_corpus())
        out = tmp_path / "seeded.xml"
        config = parse_args(["--in", "class", "--paths", *map(str, paths),
                             "--format", "scarf", "--out", str(out)])
        assert run_scan(config) == 0
        root = ET.parse(out).getroot()
        found = [e.get("rule") for e in root.iter("BugInstance")]
        assert len(found) == 8, f"expected 8 findings, got {len(found)}"
        assert sorted(found) == sorted(corpus.ALL_RULE_IDS)

        clean_dir = tmp_path / "clean"
        clean_dir.mkdir()
        clean_paths = corpus.write_corpus_dir(clean_dir, corpus.clean_corpus())
        out2 = tmp_path / "clean.xml"
        config2 = parse_args(["--in", "class", "--paths", *map(str, clean_paths),
                              "--format", "scarf", "--out", str(out2)])
        assert run_scan(config2) == 0
        root2 = ET.parse(out2).getroot()
        assert len(list(root2.iter("BugInstance"))) == 0
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"seeded detection took {elapsed:.2f}s"
        _ok(f"seeded detection: 8/8 recall, 0 on clean twins, {elapsed:.2f}s")

    def test_streaming_equivalence_randomized(self, randomized_suite):
        for findings, rendered in randomized_suite:
            streamed, buffered = rendered[FormatKind.SCARF_XML]
            assert _canonical_xml(streamed) == _canonical_xml(buffered)
            for kind in (FormatKind.LEGACY, FormatKind.DEFAULT):
                streamed, buffered = rendered[kind]
                assert streamed == buffered
        _ok("streaming equivalence on 100 randomized finding lists, 3 formats")

    def test_schema_validity_and_empty_tag_suppression(self, randomized_suite,
                                                       tmp_path):
        doc_index = 0
        for _findings, rendered in randomized_suite:
            for text in rendered[FormatKind.SCARF_XML]:
                path = tmp_path / f"doc{doc_index}.xml"
                doc_index += 1
                path.write_text(text, encoding="utf-8")
                report = validate_document(path, FormatKind.SCARF_XML)
                assert report.ok, report.violations
                assert find_empty_elements(ET.fromstring(text)) == []
        _ok(f"schema validity + zero empty elements across {doc_index} documents")

    def test_partition_discipline(self, randomized_suite):
        for findings, rendered in randomized_suite:
            streamed_xml, _ = rendered[FormatKind.SCARF_XML]
            root = ET.fromstring(streamed_xml)
            total = int(root.find("Footer/TotalFindings").text)
            assert total == len(list(root.iter("BugInstance"))) == len(findings)

            legacy, _ = rendered[FormatKind.LEGACY]
            # no header-derived content in the legacy format
            assert "cryptoscan" not in legacy
            assert "2026-08-10T12:00:00Z" not in legacy
            assert "fixture.class" not in legacy
            body = legacy.split("-- scan summary --")[0]
            blocks = sum(1 for line in body.splitlines() if line.startswith("#"))
            stated = [line for line in legacy.splitlines()
                      if line.startswith("findings: ")]
            assert len(stated) == 1
            assert int(stated[0].split()[1]) == blocks == len(findings)
        _ok("partition discipline: legacy header-free, footer counts == body")

    def test_timeout_stall_fixture(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HOME", "/nonexistent-home")
        arc = corpus.stall_archive(tmp_path / "stall.jar", 2500)
        out = tmp_path / "stalled.xml"
        config = parse_args(["--in", "archive", "--paths", str(arc),
                             "--format", "scarf", "--stream",
                             "--out", str(out), "--timeout", "1"])
        started = time.monotonic()
        code = run_scan(config)
        elapsed = time.monotonic() - started
        assert code == EXIT_TIMEOUT
        assert elapsed < 2.0, f"timeout honored in {elapsed:.2f}s, budget 2.0s"
        report = validate_document(out, FormatKind.SCARF_XML)
        assert report.ok, report.violations
        assert "<Truncated>true</Truncated>" in out.read_text()
        _ok(f"timeout: exit {code} in {elapsed:.2f}s with truncation-marked document")

    def test_argv_fuzz_10000(self):
        rng = random.Random(0xFADE)
        vocab = ["--in", "--paths", "--deps", "--format", "--stream", "--out",
                 "--timeout", "--noexit", "--env-override", "--catalog",
                 "--enum", "--check-env", "--verbosity", "--fail-on",
                 "--build-dirs", "archive", "dir", "class", "source",
                 "scarf", "legacy", "default", "a.jar", "B.class", "C.java",
                 "r.xml", "r.txt", "r.jsonl", "600", "1", "-5", "0", "High",
                 "source-types", "formats", "exit-codes", "", " ", "\t",
                 "nonsense", "--bogus", "--", "-x", "\x00", "p a t h"]
        crashes = 0
        for _ in range(10_000):
            argv = [rng.choice(vocab) for _ in range(rng.randrange(0, 10))]
            try:
                config = parse_args(argv)
                assert config.mode in (Mode.SCAN, Mode.ENUM, Mode.CHECK_ENV)
            except ArgumentValidationError as exc:
                assert exc.kind
                assert str(exc)
            except BaseException:
                crashes += 1
        assert crashes == 0
        _ok("argv fuzzing: 10,000 vectors, structured errors only, 0 crashes")

    def test_streaming_memory_bound(self):
        _, baseline = _emit(FormatKind.SCARF_XML, True, _random_findings(
            random.Random(1), 1))
        findings = _random_findings(random.Random(2), 10_000)
        _, big = _emit(FormatKind.SCARF_XML, True, findings)
        assert big.peak_buffer_bytes <= 2 * baseline.peak_buffer_bytes, (
            f"streamed peak {big.peak_buffer_bytes} exceeds 2x baseline "
            f"{baseline.peak_buffer_bytes}"
        )
        _ok(f"streaming memory: 10,000-finding peak {big.peak_buffer_bytes}B "
            f"<= 2x single-finding baseline {baseline.peak_buffer_bytes}B")
