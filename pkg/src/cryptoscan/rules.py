"""Misuse rule evaluation over resolved slices.

Rules trigger only on resolved evidence: a slice argument that stayed
Unknown never produces a finding. Evaluation is pure; finding ids are
assigned in one serialized ordering pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .catalog import ApiTarget, Catalog, RuleSpec, Severity, load_catalog
from .intake import ScanSet
from .slicer import Constant, FieldConstant, Slice, SliceCriterion


@dataclass(frozen=True)
class Rule:
    """One misuse rule bound to its catalogued API targets."""

    id: str
    title: str
    api_targets: tuple[tuple[ApiTarget, tuple[int, ...]], ...]
    predicate: Callable[[str], bool]
    severity: Severity
    message_template: str

    def watched_for(self, target: ApiTarget) -> Optional[tuple[int, ...]]:
        for candidate, watched in self.api_targets:
            if candidate == target:
                return watched
        return None


@dataclass(frozen=True)
class BugInstance:
    """One reported misuse finding."""

    id: int
    rule_id: str
    class_fqn: str
    method_signature: str
    bytecode_offset: int
    source_line: Optional[int]
    message: str
    severity: Severity
    evidence: str


def render_value(value: object) -> str:
    """Canonical text form of a resolved constant, used as evidence and
    as the predicate input."""
    if value is None:
        return "null"
    if isinstance(value, bytes):
        return "0x" + value.hex()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _predicate(spec: RuleSpec) -> Callable[[str], bool]:
    if spec.predicate == "any":
        return lambda rendered: True
    pattern = re.compile(spec.predicate[len("regex:"):])
    return lambda rendered: pattern.search(rendered) is not None


def rules_from_catalog(catalog: Catalog) -> list[Rule]:
    return [
        Rule(
            id=spec.id,
            title=spec.title,
            api_targets=spec.targets,
            predicate=_predicate(spec),
            severity=spec.severity,
            message_template=spec.message_template,
        )
        for spec in catalog.rules
    ]


def rule_catalog() -> list[Rule]:
    """The shipped rule set, ordered by id, stable across runs."""
    return rules_from_catalog(load_catalog())


def evaluate(slice_: Slice, rule: Rule) -> list[BugInstance]:
    """Zero or one finding for one slice under one rule.

    Unknown arguments never trigger: no resolved evidence, no report.
    """
    criterion = slice_.criterion
    watched = rule.watched_for(criterion.target)
    if watched is None:
        raise ValueError(
            f"rule {rule.id} does not target {criterion.target}"
        )
    for arg_index in watched:
        resolution = slice_.resolved_args.get(arg_index)
        if not isinstance(resolution, (Constant, FieldConstant)):
            continue
        evidence = render_value(resolution.value)
        if not rule.predicate(evidence):
            continue
        return [BugInstance(
            id=0,
            rule_id=rule.id,
            class_fqn=criterion.owner_fqn,
            method_signature=criterion.method_signature,
            bytecode_offset=criterion.offset,
            source_line=criterion.source_line,
            message=rule.message_template.format(evidence=evidence),
            severity=rule.severity,
            evidence=evidence,
        )]
    return []


def run_rules(scan_set: ScanSet, criteria: list[SliceCriterion],
              slices: list[Slice], rules: Optional[list[Rule]] = None,
              start_id: int = 0) -> list[BugInstance]:
    """Evaluate every rule against every matching slice.

    Findings come back ordered by (class, method, offset, rule id) with
    ids assigned from start_id in that order; duplicates collapse.
    """
    if len(criteria) != len(slices):
        raise ValueError("criteria and slices must align")
    if rules is None:
        rules = rule_catalog()
    by_target: dict[ApiTarget, list[Rule]] = {}
    for rule in rules:
        for target, _watched in rule.api_targets:
            by_target.setdefault(target, []).append(rule)

    found: list[BugInstance] = []
    for slice_ in slices:
        for rule in by_target.get(slice_.criterion.target, []):
            found.extend(evaluate(slice_, rule))

    found.sort(key=lambda b: (b.class_fqn, b.method_signature,
                              b.bytecode_offset, b.rule_id))
    out: list[BugInstance] = []
    seen: set[tuple] = set()
    for bug in found:
        key = (bug.rule_id, bug.class_fqn, bug.method_signature, bug.bytecode_offset)
        if key in seen:
            continue
        seen.add(key)
        out.append(replace(bug, id=start_id + len(out)))
    return out
