"""Security-API catalog and rule metadata, loaded from one text file.

The shipped configuration lives at resources/catalog.txt. Three record
kinds, shell-style quoting, # comments:

    api <class> <method> <descriptor> <watched-indices>
    rule <id> <severity> <predicate> <title> <message-template>
    target <rule-id> <class> <method> <descriptor> <watched-indices>

Watched indices are comma-separated argument positions (receiver
excluded). Predicates are `any` (any resolved constant triggers) or
`regex:<pattern>` (triggers when the rendered constant matches), so
new rules can ship without code changes.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional

DEFAULT_CATALOG_RESOURCE = "catalog.txt"


class CatalogError(Exception):
    """Catalog file is malformed or internally inconsistent."""


class Severity(Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"


@dataclass(frozen=True)
class ApiTarget:
    """One catalogued method, keyed by exact owner/name/descriptor."""

    class_fqn: str
    method: str
    descriptor: str

    def __str__(self) -> str:
        return f"{self.class_fqn}.{self.method}{self.descriptor}"


@dataclass(frozen=True)
class ApiEntry:
    target: ApiTarget
    watched: tuple[int, ...]


@dataclass(frozen=True)
class RuleSpec:
    id: str
    severity: Severity
    predicate: str                 # "any" or "regex:<pattern>"
    title: str
    message_template: str
    targets: tuple[tuple[ApiTarget, tuple[int, ...]], ...]


@dataclass(frozen=True)
class Catalog:
    api_entries: tuple[ApiEntry, ...]
    rules: tuple[RuleSpec, ...]

    def api_index(self) -> dict[ApiTarget, ApiEntry]:
        return {e.target: e for e in self.api_entries}


def _parse_indices(token: str, context: str) -> tuple[int, ...]:
    try:
        indices = tuple(int(part) for part in token.split(","))
    except ValueError:
        raise CatalogError(f"{context}: bad watched indices {token!r}") from None
    if any(i < 0 for i in indices) or len(set(indices)) != len(indices):
        raise CatalogError(f"{context}: watched indices must be unique and non-negative")
    return indices


def _validate_predicate(pred: str, context: str) -> None:
    if pred == "any":
        return
    if pred.startswith("regex:"):
        try:
            re.compile(pred[len("regex:"):])
        except re.error as exc:
            raise CatalogError(f"{context}: bad predicate regex: {exc}") from None
        return
    raise CatalogError(f"{context}: unknown predicate kind {pred!r}")


def parse_catalog(text: str, origin: str = "<catalog>") -> Catalog:
    api: dict[ApiTarget, ApiEntry] = {}
    rules: dict[str, dict] = {}
    rule_targets: list[tuple[str, ApiTarget, tuple[int, ...], str]] = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        context = f"{origin}:{lineno}"
        try:
            tokens = shlex.split(line, comments=True)
        except ValueError as exc:
            raise CatalogError(f"{context}: {exc}") from None
        if not tokens:
            continue
        kind = tokens[0]
        if kind == "api":
            if len(tokens) != 5:
                raise CatalogError(f"{context}: api wants 4 fields, got {len(tokens) - 1}")
            target = ApiTarget(tokens[1], tokens[2], tokens[3])
            if target in api:
                raise CatalogError(f"{context}: duplicate api entry {target}")
            api[target] = ApiEntry(target, _parse_indices(tokens[4], context))
        elif kind == "rule":
            if len(tokens) != 6:
                raise CatalogError(f"{context}: rule wants 5 fields, got {len(tokens) - 1}")
            rule_id = tokens[1]
            if rule_id in rules:
                raise CatalogError(f"{context}: duplicate rule id {rule_id!r}")
            try:
                severity = Severity(tokens[2])
            except ValueError:
                raise CatalogError(
                    f"{context}: severity {tokens[2]!r} not one of "
                    f"{[s.value for s in Severity]}"
                ) from None
            _validate_predicate(tokens[3], context)
            rules[rule_id] = {
                "severity": severity, "predicate": tokens[3],
                "title": tokens[4], "message": tokens[5],
            }
        elif kind == "target":
            if len(tokens) != 6:
                raise CatalogError(f"{context}: target wants 5 fields, got {len(tokens) - 1}")
            target = ApiTarget(tokens[2], tokens[3], tokens[4])
            rule_targets.append(
                (tokens[1], target, _parse_indices(tokens[5], context), context)
            )
        else:
            raise CatalogError(f"{context}: unknown record kind {kind!r}")

    grouped: dict[str, list[tuple[ApiTarget, tuple[int, ...]]]] = {rid: [] for rid in rules}
    for rule_id, target, watched, context in rule_targets:
        if rule_id not in rules:
            raise CatalogError(f"{context}: target names unknown rule {rule_id!r}")
        entry = api.get(target)
        if entry is None:
            raise CatalogError(f"{context}: target {target} has no api entry")
        if not set(watched) <= set(entry.watched):
            raise CatalogError(
                f"{context}: watched {watched} not covered by api watched {entry.watched}"
            )
        grouped[rule_id].append((target, watched))

    specs = []
    for rule_id in sorted(rules):
        info = rules[rule_id]
        if not grouped[rule_id]:
            raise CatalogError(f"rule {rule_id!r} has no targets")
        specs.append(RuleSpec(
            id=rule_id,
            severity=info["severity"],
            predicate=info["predicate"],
            title=info["title"],
            message_template=info["message"],
            targets=tuple(grouped[rule_id]),
        ))
    if not api:
        raise CatalogError(f"{origin}: no api entries")
    return Catalog(api_entries=tuple(api.values()), rules=tuple(specs))


def load_catalog(path: Optional[Path] = None) -> Catalog:
    """Load a catalog file, defaulting to the shipped resource."""
    if path is not None:
        return parse_catalog(Path(path).read_text(encoding="utf-8"), origin=str(path))
    ref = resources.files("cryptoscan").joinpath("resources", DEFAULT_CATALOG_RESOURCE)
    return parse_catalog(ref.read_text(encoding="utf-8"), origin=DEFAULT_CATALOG_RESOURCE)
