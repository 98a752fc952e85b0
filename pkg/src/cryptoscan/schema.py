"""Validator for the XSD subset the shipped report schema uses.

No XML-schema library is available in the target environments, so the
schema file is interpreted directly: global elements, named and inline
complex types, sequences with minOccurs/maxOccurs, attributes, string
enumerations, and the xs:string / xs:integer / xs:boolean builtins.
Anything outside that subset in a schema file is rejected loudly.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

XS = "{http://www.w3.org/2001/XMLSchema}"

_BUILTINS = {
    "xs:string": lambda v: True,
    "xs:integer": lambda v: re.fullmatch(r"[+-]?\d+", v.strip()) is not None,
    "xs:boolean": lambda v: v.strip() in ("true", "false", "1", "0"),
}


class SchemaError(Exception):
    """Schema file is malformed or uses constructs outside the subset."""


@dataclass
class _Attribute:
    name: str
    type_name: str
    required: bool


@dataclass
class _Particle:
    element: "_ElementDecl"
    min_occurs: int
    max_occurs: Optional[int]  # None = unbounded


@dataclass
class _ComplexType:
    sequence: list[_Particle] = field(default_factory=list)
    attributes: list[_Attribute] = field(default_factory=list)


@dataclass
class _ElementDecl:
    name: str
    type_name: Optional[str] = None          # builtin or named type
    inline_complex: Optional[_ComplexType] = None


class XsdSubsetValidator:
    """Checks a document tree against one parsed schema."""

    def __init__(self, schema_root: ET.Element):
        if schema_root.tag != XS + "schema":
            raise SchemaError(f"root element is {schema_root.tag}, not xs:schema")
        self._complex_types: dict[str, _ComplexType] = {}
        self._enumerations: dict[str, set[str]] = {}
        self._globals: dict[str, _ElementDecl] = {}
        for child in schema_root:
            if child.tag == XS + "complexType":
                name = child.get("name")
                if not name:
                    raise SchemaError("top-level complexType needs a name")
                self._complex_types[name] = self._parse_complex_type(child)
            elif child.tag == XS + "simpleType":
                name = child.get("name")
                if not name:
                    raise SchemaError("top-level simpleType needs a name")
                self._enumerations[name] = self._parse_enumeration(child)
            elif child.tag == XS + "element":
                decl = self._parse_element(child)
                self._globals[decl.name] = decl
            else:
                raise SchemaError(f"unsupported top-level construct {child.tag}")

    @classmethod
    def from_path(cls, path: Path) -> "XsdSubsetValidator":
        return cls(ET.parse(path).getroot())

    def _parse_enumeration(self, node: ET.Element) -> set[str]:
        restriction = node.find(XS + "restriction")
        if restriction is None or restriction.get("base") != "xs:string":
            raise SchemaError("simpleType must restrict xs:string")
        values = {e.get("value") for e in restriction.findall(XS + "enumeration")}
        if not values or None in values:
            raise SchemaError("enumeration values missing")
        return values

    def _parse_complex_type(self, node: ET.Element) -> _ComplexType:
        ct = _ComplexType()
        for child in node:
            if child.tag == XS + "sequence":
                for item in child:
                    if item.tag != XS + "element":
                        raise SchemaError(f"unsupported sequence item {item.tag}")
                    max_raw = item.get("maxOccurs", "1")
                    ct.sequence.append(_Particle(
                        element=self._parse_element(item),
                        min_occurs=int(item.get("minOccurs", "1")),
                        max_occurs=None if max_raw == "unbounded" else int(max_raw),
                    ))
            elif child.tag == XS + "attribute":
                ct.attributes.append(_Attribute(
                    name=child.get("name"),
                    type_name=child.get("type", "xs:string"),
                    required=child.get("use") == "required",
                ))
            else:
                raise SchemaError(f"unsupported complexType construct {child.tag}")
        return ct

    def _parse_element(self, node: ET.Element) -> _ElementDecl:
        name = node.get("name")
        if not name:
            raise SchemaError("element declarations must be named")
        type_name = node.get("type")
        inline = node.find(XS + "complexType")
        if type_name and inline is not None:
            raise SchemaError(f"element {name}: both type= and inline complexType")
        return _ElementDecl(
            name=name,
            type_name=type_name,
            inline_complex=self._parse_complex_type(inline) if inline is not None else None,
        )

    # -- validation ---------------------------------------------------------

    def validate(self, root: ET.Element) -> list[str]:
        """Violations found in the document, with element paths; empty
        means the document conforms."""
        decl = self._globals.get(root.tag)
        if decl is None:
            return [f"/{root.tag}: no declaration for document root"]
        violations: list[str] = []
        self._validate_element(root, decl, f"/{root.tag}", violations)
        return violations

    def _check_simple(self, value: str, type_name: str, path: str,
                      violations: list[str]) -> None:
        if type_name in _BUILTINS:
            if not _BUILTINS[type_name](value):
                violations.append(f"{path}: {value!r} is not a valid {type_name}")
        elif type_name in self._enumerations:
            if value not in self._enumerations[type_name]:
                allowed = sorted(self._enumerations[type_name])
                violations.append(f"{path}: {value!r} not in enumeration {allowed}")
        else:
            violations.append(f"{path}: unknown type {type_name}")

    def _validate_element(self, node: ET.Element, decl: _ElementDecl,
                          path: str, violations: list[str]) -> None:
        if decl.type_name in _BUILTINS or decl.type_name in self._enumerations:
            if list(node) or node.attrib:
                violations.append(f"{path}: simple-typed element has children or attributes")
                return
            self._check_simple(node.text or "", decl.type_name, path, violations)
            return
        if decl.inline_complex is not None:
            ct = decl.inline_complex
        elif decl.type_name is not None:
            ct = self._complex_types.get(decl.type_name)
            if ct is None:
                violations.append(f"{path}: unknown type {decl.type_name}")
                return
        else:
            violations.append(f"{path}: element declaration carries no type")
            return
        self._validate_complex(node, ct, path, violations)

    def _validate_complex(self, node: ET.Element, ct: _ComplexType,
                          path: str, violations: list[str]) -> None:
        allowed = {a.name: a for a in ct.attributes}
        for attr_name, attr_value in node.attrib.items():
            spec = allowed.get(attr_name)
            if spec is None:
                violations.append(f"{path}: unexpected attribute {attr_name!r}")
                continue
            self._check_simple(attr_value, spec.type_name,
                               f"{path}/@{attr_name}", violations)
        for spec in ct.attributes:
            if spec.required and spec.name not in node.attrib:
                violations.append(f"{path}: missing required attribute {spec.name!r}")

        if (node.text or "").strip() and ct.sequence:
            violations.append(f"{path}: unexpected text content")

        children = list(node)
        pos = 0
        for particle in ct.sequence:
            count = 0
            while pos < len(children) and children[pos].tag == particle.element.name:
                index = count + 1
                self._validate_element(
                    children[pos], particle.element,
                    f"{path}/{particle.element.name}[{index}]", violations,
                )
                pos += 1
                count += 1
                if particle.max_occurs is not None and count > particle.max_occurs:
                    violations.append(
                        f"{path}: element {particle.element.name!r} occurs too often"
                    )
                    break
            if count < particle.min_occurs:
                violations.append(
                    f"{path}: element {particle.element.name!r} occurs {count} "
                    f"time(s), needs at least {particle.min_occurs}"
                )
        for extra in children[pos:]:
            violations.append(f"{path}: unexpected element {extra.tag!r}")

        if not ct.sequence and len(children) == 0 and (node.text or "").strip():
            violations.append(f"{path}: attribute-only element has text content")
