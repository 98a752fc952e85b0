"""Native parser for the JVM class-file binary format.

Parses compiled classes (big-endian, magic 0xCAFEBABE) up to format
level 52 into an immutable in-memory representation: constant pool,
member tables, and decodable method bytecode. Attributes the analysis
does not need are length-skipped, never rejected.
"""

from __future__ import annotations

import struct
import zipfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from .opcodes import OPCODES, WIDE_ELIGIBLE

MAGIC = 0xCAFEBABE
MAX_SUPPORTED_MAJOR = 52

ACC_STATIC = 0x0008
ACC_FINAL = 0x0010
ACC_NATIVE = 0x0100
ACC_ABSTRACT = 0x0400


class ClassFileError(Exception):
    """Base class for all class-file parsing failures."""


class BadMagic(ClassFileError):
    """First four bytes are not 0xCAFEBABE."""


class UnsupportedVersion(ClassFileError):
    """Format level above the supported maximum."""

    def __init__(self, major: int, minor: int):
        super().__init__(
            f"class file major version {major} (minor {minor}) is above the "
            f"supported maximum {MAX_SUPPORTED_MAJOR}"
        )
        self.major = major
        self.minor = minor


class Truncated(ClassFileError):
    """Input ended in the middle of a structure."""


class MalformedPool(ClassFileError):
    """Constant pool is inconsistent: unknown tag, bad cross-index, or
    undecodable content."""


class UnknownOpcode(ClassFileError):
    """Bytecode contains an opcode outside the supported set."""


class MalformedCode(ClassFileError):
    """Bytecode operands overrun the code array or branch off an
    instruction boundary."""


class NotAnArchive(ClassFileError):
    """Path is not a readable zip-format archive."""


class AllEntriesFailed(ClassFileError):
    """Every class entry in an archive failed to parse."""


class Tag(Enum):
    """Constant pool entry kinds (format tags in parentheses)."""

    UTF8 = "Utf8"                      # 1
    INTEGER = "Integer"                # 3
    FLOAT = "Float"                    # 4
    LONG = "Long"                      # 5
    DOUBLE = "Double"                  # 6
    CLASS_REF = "ClassRef"             # 7
    STRING_REF = "StringRef"           # 8
    FIELD_REF = "FieldRef"             # 9
    METHOD_REF = "MethodRef"           # 10
    INTERFACE_METHOD_REF = "InterfaceMethodRef"  # 11
    NAME_AND_TYPE = "NameAndType"      # 12
    METHOD_HANDLE = "MethodHandle"     # 15
    METHOD_TYPE = "MethodType"         # 16
    INVOKE_DYNAMIC = "InvokeDynamic"   # 18
    PLACEHOLDER = "Placeholder"        # second slot of Long/Double


_TAG_BY_NUMBER = {
    1: Tag.UTF8, 3: Tag.INTEGER, 4: Tag.FLOAT, 5: Tag.LONG, 6: Tag.DOUBLE,
    7: Tag.CLASS_REF, 8: Tag.STRING_REF, 9: Tag.FIELD_REF, 10: Tag.METHOD_REF,
    11: Tag.INTERFACE_METHOD_REF, 12: Tag.NAME_AND_TYPE, 15: Tag.METHOD_HANDLE,
    16: Tag.METHOD_TYPE, 18: Tag.INVOKE_DYNAMIC,
}


@dataclass(frozen=True)
class ConstantEntry:
    """One constant pool slot; payload shape depends on the tag.

    Utf8/Integer/Float/Long/Double hold the decoded value. ClassRef,
    StringRef and MethodType hold a single pool index. FieldRef,
    MethodRef, InterfaceMethodRef, NameAndType, MethodHandle and
    InvokeDynamic hold an index pair. Placeholder holds None.
    """

    tag: Tag
    payload: object


@dataclass(frozen=True)
class Instruction:
    """One decoded bytecode instruction.

    Branch operands are stored as absolute bytecode offsets.
    tableswitch operands are (default, low, high, targets);
    lookupswitch operands are (default, ((match, target), ...)).
    """

    offset: int
    opcode: int
    mnemonic: str
    operands: tuple = ()
    wide: bool = False


@dataclass(frozen=True)
class ExceptionHandler:
    start_pc: int
    end_pc: int
    handler_pc: int
    catch_type: int


@dataclass(frozen=True)
class CodeBody:
    """Decoded Code attribute of one method."""

    max_stack: int
    max_locals: int
    instructions: tuple[Instruction, ...]
    line_table: Optional[dict[int, int]] = None
    handlers: tuple[ExceptionHandler, ...] = ()

    def line_for_offset(self, offset: int) -> Optional[int]:
        """Source line of the last line-table entry at or before offset."""
        if not self.line_table:
            return None
        best = None
        best_pc = -1
        for pc, line in self.line_table.items():
            if best_pc < pc <= offset:
                best, best_pc = line, pc
        return best


@dataclass(frozen=True)
class _RawCode:
    max_stack: int
    max_locals: int
    bytecode: bytes
    line_table: Optional[tuple[tuple[int, int], ...]]
    handlers: tuple[ExceptionHandler, ...]


@dataclass(eq=True)
class MemberInfo:
    """One field or method declaration."""

    access_flags: int
    name: str
    descriptor: str
    constant_value: object = None          # ConstantValue attribute, fields only
    raw_code: Optional[_RawCode] = None    # Code attribute, methods only
    skipped_attributes: tuple[str, ...] = ()  # length-skipped, kept by name
    _decoded: Optional[CodeBody] = field(
        default=None, compare=False, repr=False
    )

    @property
    def has_code(self) -> bool:
        return self.raw_code is not None

    @property
    def is_static(self) -> bool:
        return bool(self.access_flags & ACC_STATIC)

    @property
    def signature(self) -> str:
        return self.name + self.descriptor


@dataclass(eq=True)
class ClassFile:
    """Parsed representation of one compiled class.

    The constant pool is 1-indexed exactly as on disk: slot 0 and the
    slot after each Long/Double entry hold Placeholder entries.
    """

    magic: int
    minor_version: int
    major_version: int
    constant_pool: tuple[ConstantEntry, ...]
    access_flags: int
    this_class: int
    super_class: int
    interfaces: tuple[int, ...]
    fields: tuple[MemberInfo, ...]
    methods: tuple[MemberInfo, ...]
    source_path: Optional[Path] = None
    skipped_attributes: tuple[str, ...] = ()  # class-level, length-skipped

    def entry(self, index: int) -> ConstantEntry:
        if not 1 <= index < len(self.constant_pool):
            raise MalformedPool(f"constant pool index {index} out of range")
        ent = self.constant_pool[index]
        if ent.tag is Tag.PLACEHOLDER:
            raise MalformedPool(f"constant pool index {index} is a placeholder slot")
        return ent

    def utf8(self, index: int) -> str:
        ent = self.entry(index)
        if ent.tag is not Tag.UTF8:
            raise MalformedPool(f"pool slot {index} is {ent.tag.value}, expected Utf8")
        return ent.payload

    def class_internal_name(self, index: int) -> str:
        ent = self.entry(index)
        if ent.tag is not Tag.CLASS_REF:
            raise MalformedPool(f"pool slot {index} is {ent.tag.value}, expected ClassRef")
        return self.utf8(ent.payload)

    def member_ref(self, index: int) -> tuple[str, str, str]:
        """Resolve a Field/Method/InterfaceMethodRef to (owner, name, descriptor).

        Owner is the internal (slash-separated) name.
        """
        ent = self.entry(index)
        if ent.tag not in (Tag.FIELD_REF, Tag.METHOD_REF, Tag.INTERFACE_METHOD_REF):
            raise MalformedPool(
                f"pool slot {index} is {ent.tag.value}, expected a member reference"
            )
        class_index, nat_index = ent.payload
        owner = self.class_internal_name(class_index)
        nat = self.entry(nat_index)
        if nat.tag is not Tag.NAME_AND_TYPE:
            raise MalformedPool(f"pool slot {nat_index} is {nat.tag.value}, expected NameAndType")
        name_index, desc_index = nat.payload
        return owner, self.utf8(name_index), self.utf8(desc_index)

    def find_method(self, name: str, descriptor: str) -> Optional[MemberInfo]:
        for m in self.methods:
            if m.name == name and m.descriptor == descriptor:
                return m
        return None

    def find_field(self, name: str) -> Optional[MemberInfo]:
        for f in self.fields:
            if f.name == name:
                return f
        return None


class _Reader:
    """Big-endian cursor over the input bytes; raises Truncated on overrun."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise Truncated(
                f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u1(self) -> int:
        return self.take(1)[0]

    def u2(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u4(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def s4(self) -> int:
        return struct.unpack(">i", self.take(4))[0]

    def f4(self) -> float:
        return struct.unpack(">f", self.take(4))[0]

    def f8(self) -> float:
        return struct.unpack(">d", self.take(8))[0]

    def s8(self) -> int:
        return struct.unpack(">q", self.take(8))[0]


def decode_modified_utf8(data: bytes) -> str:
    """Decode the class-file string encoding (CESU-8 with C0 80 for NUL)."""
    units: list[int] = []
    i, n = 0, len(data)
    while i < n:
        b = data[i]
        if b < 0x80:
            if b == 0:
                raise ValueError(f"raw NUL byte at {i}")
            units.append(b)
            i += 1
        elif b >> 5 == 0b110:
            if i + 1 >= n or (data[i + 1] & 0xC0) != 0x80:
                raise ValueError(f"bad 2-byte sequence at {i}")
            value = ((b & 0x1F) << 6) | (data[i + 1] & 0x3F)
            if value != 0 and value < 0x80:
                raise ValueError(f"overlong 2-byte sequence at {i}")
            units.append(value)
            i += 2
        elif b >> 4 == 0b1110:
            if i + 2 >= n or (data[i + 1] & 0xC0) != 0x80 or (data[i + 2] & 0xC0) != 0x80:
                raise ValueError(f"bad 3-byte sequence at {i}")
            value = ((b & 0x0F) << 12) | ((data[i + 1] & 0x3F) << 6) | (data[i + 2] & 0x3F)
            if value < 0x800:
                raise ValueError(f"overlong 3-byte sequence at {i}")
            units.append(value)
            i += 3
        else:
            raise ValueError(f"invalid lead byte 0x{b:02x} at {i}")

    out: list[str] = []
    j = 0
    while j < len(units):
        u = units[j]
        if 0xD800 <= u <= 0xDBFF and j + 1 < len(units) and 0xDC00 <= units[j + 1] <= 0xDFFF:
            out.append(chr(0x10000 + ((u - 0xD800) << 10) + (units[j + 1] - 0xDC00)))
            j += 2
        elif 0xD800 <= u <= 0xDFFF:
            raise ValueError(f"lone surrogate 0x{u:04x}")
        else:
            out.append(chr(u))
            j += 1
    return "".join(out)


def parse_field_descriptor(desc: str, pos: int = 0) -> int:
    """Validate one field type starting at pos; returns the end position."""
    n = len(desc)
    while pos < n and desc[pos] == "[":
        pos += 1
    if pos >= n:
        raise ValueError("descriptor ends inside array type")
    c = desc[pos]
    if c in "BCDFIJSZ":
        return pos + 1
    if c == "L":
        end = desc.find(";", pos)
        if end < 0 or end == pos + 1:
            raise ValueError("unterminated or empty object type")
        return end + 1
    raise ValueError(f"bad type char {c!r} at {pos}")


def parse_method_descriptor(desc: str) -> tuple[list[str], str]:
    """Split a method descriptor into (parameter types, return type)."""
    if not desc.startswith("("):
        raise ValueError("method descriptor must start with '('")
    params: list[str] = []
    pos = 1
    while pos < len(desc) and desc[pos] != ")":
        end = parse_field_descriptor(desc, pos)
        params.append(desc[pos:end])
        pos = end
    if pos >= len(desc):
        raise ValueError("method descriptor missing ')'")
    ret = desc[pos + 1:]
    if ret != "V":
        end = parse_field_descriptor(ret, 0)
        if end != len(ret):
            raise ValueError("trailing characters after return type")
    elif len(ret) != 1:
        raise ValueError("trailing characters after void return")
    return params, ret


def type_width(type_desc: str) -> int:
    """Local/stack slots occupied by a value of the given type."""
    return 2 if type_desc in ("J", "D") else 1


def _validate_descriptor(desc: str) -> None:
    try:
        if desc.startswith("("):
            parse_method_descriptor(desc)
        else:
            end = parse_field_descriptor(desc, 0)
            if end != len(desc):
                raise ValueError("trailing characters after field type")
    except ValueError as exc:
        raise MalformedPool(f"invalid descriptor {desc!r}: {exc}") from None


_POOL_REF_SHAPES = {
    Tag.CLASS_REF: (Tag.UTF8,),
    Tag.STRING_REF: (Tag.UTF8,),
    Tag.METHOD_TYPE: (Tag.UTF8,),
}

_MEMBER_REF_TAGS = (Tag.FIELD_REF, Tag.METHOD_REF, Tag.INTERFACE_METHOD_REF)


def _parse_constant_pool(r: _Reader) -> tuple[ConstantEntry, ...]:
    count = r.u2()
    if count < 1:
        raise MalformedPool("constant pool count must be at least 1")
    placeholder = ConstantEntry(Tag.PLACEHOLDER, None)
    pool: list[ConstantEntry] = [placeholder]
    while len(pool) < count:
        tag_num = r.u1()
        tag = _TAG_BY_NUMBER.get(tag_num)
        if tag is None:
            raise MalformedPool(f"unknown constant tag {tag_num} in slot {len(pool)}")
        if tag is Tag.UTF8:
            length = r.u2()
            raw = r.take(length)
            try:
                payload: object = decode_modified_utf8(raw)
            except ValueError as exc:
                raise MalformedPool(f"undecodable Utf8 in slot {len(pool)}: {exc}") from None
        elif tag is Tag.INTEGER:
            payload = r.s4()
        elif tag is Tag.FLOAT:
            payload = r.f4()
        elif tag is Tag.LONG:
            payload = r.s8()
        elif tag is Tag.DOUBLE:
            payload = r.f8()
        elif tag in (Tag.CLASS_REF, Tag.STRING_REF, Tag.METHOD_TYPE):
            payload = r.u2()
        elif tag is Tag.METHOD_HANDLE:
            payload = (r.u1(), r.u2())
        else:  # FieldRef/MethodRef/InterfaceMethodRef/NameAndType/InvokeDynamic
            payload = (r.u2(), r.u2())
        pool.append(ConstantEntry(tag, payload))
        if tag in (Tag.LONG, Tag.DOUBLE):
            if len(pool) >= count:
                raise MalformedPool("wide constant overruns the pool")
            pool.append(placeholder)
    return tuple(pool)


def _check_pool_index(pool: tuple[ConstantEntry, ...], index: int,
                      expected: tuple[Tag, ...], context: str) -> None:
    if not 1 <= index < len(pool):
        raise MalformedPool(f"{context}: index {index} out of range")
    actual = pool[index].tag
    if actual not in expected:
        names = "/".join(t.value for t in expected)
        raise MalformedPool(f"{context}: slot {index} is {actual.value}, expected {names}")


def _validate_pool(pool: tuple[ConstantEntry, ...]) -> None:
    for i, ent in enumerate(pool):
        if ent.tag in _POOL_REF_SHAPES:
            _check_pool_index(pool, ent.payload, _POOL_REF_SHAPES[ent.tag],
                              f"{ent.tag.value} slot {i}")
        elif ent.tag in _MEMBER_REF_TAGS:
            class_index, nat_index = ent.payload
            _check_pool_index(pool, class_index, (Tag.CLASS_REF,),
                              f"{ent.tag.value} slot {i}")
            _check_pool_index(pool, nat_index, (Tag.NAME_AND_TYPE,),
                              f"{ent.tag.value} slot {i}")
        elif ent.tag is Tag.NAME_AND_TYPE:
            name_index, desc_index = ent.payload
            _check_pool_index(pool, name_index, (Tag.UTF8,), f"NameAndType slot {i}")
            _check_pool_index(pool, desc_index, (Tag.UTF8,), f"NameAndType slot {i}")
        elif ent.tag is Tag.METHOD_HANDLE:
            kind, ref_index = ent.payload
            if kind in (1, 2, 3, 4):
                expected: tuple[Tag, ...] = (Tag.FIELD_REF,)
            elif kind in (5, 8):
                expected = (Tag.METHOD_REF,)
            elif kind in (6, 7):
                expected = (Tag.METHOD_REF, Tag.INTERFACE_METHOD_REF)
            elif kind == 9:
                expected = (Tag.INTERFACE_METHOD_REF,)
            else:
                raise MalformedPool(f"MethodHandle slot {i}: bad reference kind {kind}")
            _check_pool_index(pool, ref_index, expected, f"MethodHandle slot {i}")
        elif ent.tag is Tag.INVOKE_DYNAMIC:
            _bootstrap, nat_index = ent.payload
            _check_pool_index(pool, nat_index, (Tag.NAME_AND_TYPE,),
                              f"InvokeDynamic slot {i}")


_CONSTANT_VALUE_TAGS = (Tag.INTEGER, Tag.FLOAT, Tag.LONG, Tag.DOUBLE, Tag.STRING_REF)


def _decode_pool_constant(pool: tuple[ConstantEntry, ...], index: int) -> object:
    _check_pool_index(pool, index, _CONSTANT_VALUE_TAGS, "ConstantValue")
    ent = pool[index]
    if ent.tag is Tag.STRING_REF:
        _check_pool_index(pool, ent.payload, (Tag.UTF8,), "ConstantValue string")
        return pool[ent.payload].payload
    return ent.payload


def _parse_code_attribute(r: _Reader, pool: tuple[ConstantEntry, ...],
                          skipped: list[str]) -> _RawCode:
    max_stack = r.u2()
    max_locals = r.u2()
    code_length = r.u4()
    bytecode = r.take(code_length)
    handler_count = r.u2()
    handlers = tuple(
        ExceptionHandler(r.u2(), r.u2(), r.u2(), r.u2()) for _ in range(handler_count)
    )
    line_table: Optional[list[tuple[int, int]]] = None
    attr_count = r.u2()
    for _ in range(attr_count):
        name_index = r.u2()
        _check_pool_index(pool, name_index, (Tag.UTF8,), "code attribute name")
        attr_name = pool[name_index].payload
        length = r.u4()
        if attr_name == "LineNumberTable":
            sub = _Reader(r.take(length))
            entries = sub.u2()
            table = [(sub.u2(), sub.u2()) for _ in range(entries)]
            if line_table is None:
                line_table = []
            line_table.extend(table)
        else:
            r.take(length)
            skipped.append(attr_name)
    return _RawCode(max_stack, max_locals, bytecode,
                    tuple(line_table) if line_table is not None else None, handlers)


def _parse_members(r: _Reader, pool: tuple[ConstantEntry, ...],
                   methods: bool) -> tuple[MemberInfo, ...]:
    count = r.u2()
    out = []
    for _ in range(count):
        access = r.u2()
        name_index = r.u2()
        _check_pool_index(pool, name_index, (Tag.UTF8,), "member name")
        desc_index = r.u2()
        _check_pool_index(pool, desc_index, (Tag.UTF8,), "member descriptor")
        name = pool[name_index].payload
        desc = pool[desc_index].payload
        _validate_descriptor(desc)
        if methods != desc.startswith("("):
            raise MalformedPool(
                f"member {name!r} has a "
                f"{'field' if methods else 'method'} descriptor {desc!r}"
            )
        member = MemberInfo(access_flags=access, name=name, descriptor=desc)
        skipped: list[str] = []
        attr_count = r.u2()
        for _ in range(attr_count):
            attr_name_index = r.u2()
            _check_pool_index(pool, attr_name_index, (Tag.UTF8,), "member attribute name")
            attr_name = pool[attr_name_index].payload
            length = r.u4()
            if attr_name == "Code" and methods:
                sub = _Reader(r.take(length))
                member.raw_code = _parse_code_attribute(sub, pool, skipped)
            elif attr_name == "ConstantValue" and not methods:
                sub = _Reader(r.take(length))
                member.constant_value = _decode_pool_constant(pool, sub.u2())
            else:
                r.take(length)
                skipped.append(attr_name)
        member.skipped_attributes = tuple(skipped)
        out.append(member)
    return tuple(out)


def parse_class_file(data: bytes, origin: Optional[Path] = None) -> ClassFile:
    """Parse raw class-file bytes into a ClassFile.

    Raises BadMagic, UnsupportedVersion, Truncated or MalformedPool;
    never returns a class above format level 52.
    """
    if not data:
        raise Truncated("empty input")
    r = _Reader(bytes(data))
    magic = r.u4()
    if magic != MAGIC:
        raise BadMagic(f"bad magic 0x{magic:08X}")
    minor = r.u2()
    major = r.u2()
    if major > MAX_SUPPORTED_MAJOR:
        raise UnsupportedVersion(major, minor)
    pool = _parse_constant_pool(r)
    _validate_pool(pool)
    access_flags = r.u2()
    this_class = r.u2()
    _check_pool_index(pool, this_class, (Tag.CLASS_REF,), "this_class")
    super_class = r.u2()
    if super_class != 0:
        _check_pool_index(pool, super_class, (Tag.CLASS_REF,), "super_class")
    interfaces = tuple(r.u2() for _ in range(r.u2()))
    for idx in interfaces:
        _check_pool_index(pool, idx, (Tag.CLASS_REF,), "interface")
    fields = _parse_members(r, pool, methods=False)
    methods = _parse_members(r, pool, methods=True)
    # Class-level attributes are skipped wholesale but recorded by name;
    # reading them keeps truncation inside one detectable.
    class_skipped: list[str] = []
    for _ in range(r.u2()):
        name_index = r.u2()
        _check_pool_index(pool, name_index, (Tag.UTF8,), "class attribute name")
        r.take(r.u4())
        class_skipped.append(pool[name_index].payload)

    cf = ClassFile(
        magic=magic,
        minor_version=minor,
        major_version=major,
        constant_pool=pool,
        access_flags=access_flags,
        this_class=this_class,
        super_class=super_class,
        interfaces=interfaces,
        fields=fields,
        methods=methods,
        source_path=origin,
        skipped_attributes=tuple(class_skipped),
    )
    if not cf.class_internal_name(this_class):
        raise MalformedPool("this_class resolves to an empty name")
    return cf


def fully_qualified_name(cf: ClassFile) -> str:
    """Dotted name of the class, taken from the pool, never the filesystem."""
    return cf.class_internal_name(cf.this_class).replace("/", ".")


def enumerate_archive_classes(
    archive: Path,
    on_error: Optional[Callable[[str, ClassFileError], None]] = None,
    cancel: Optional[Callable[[], None]] = None,
) -> list[ClassFile]:
    """Parse every .class entry of a zip archive, in entry-name order.

    Per-entry failures are passed to on_error and skipped; if every
    class entry fails, AllEntriesFailed is raised. `cancel` is polled
    once per entry.
    """
    archive = Path(archive)
    try:
        zf = zipfile.ZipFile(archive)
    except (zipfile.BadZipFile, OSError) as exc:
        raise NotAnArchive(f"{archive}: {exc}") from None
    classes: list[ClassFile] = []
    failures = 0
    with zf:
        names = sorted(n for n in zf.namelist()
                       if n.endswith(".class") and not n.endswith("/"))
        for name in names:
            if cancel is not None:
                cancel()
            try:
                classes.append(parse_class_file(zf.read(name), origin=archive / name))
            except ClassFileError as exc:
                failures += 1
                if on_error is not None:
                    on_error(name, exc)
    if failures and not classes:
        raise AllEntriesFailed(f"{archive}: all {failures} class entries failed to parse")
    return classes


def _decode_operands(code: bytes, pos: int, start: int, mnemonic: str,
                     fmt: str) -> tuple[tuple, int]:
    def need(n: int) -> None:
        if pos + n > len(code):
            raise MalformedCode(
                f"{mnemonic} at {start}: operands overrun code length {len(code)}"
            )

    if fmt == "":
        return (), pos
    if fmt in ("u1", "cp1", "local", "atype"):
        need(1)
        return (code[pos],), pos + 1
    if fmt == "s1":
        need(1)
        return (struct.unpack(">b", code[pos:pos + 1])[0],), pos + 1
    if fmt in ("u2", "cp2"):
        need(2)
        return (struct.unpack(">H", code[pos:pos + 2])[0],), pos + 2
    if fmt == "s2":
        need(2)
        return (struct.unpack(">h", code[pos:pos + 2])[0],), pos + 2
    if fmt == "br2":
        need(2)
        rel = struct.unpack(">h", code[pos:pos + 2])[0]
        return (start + rel,), pos + 2
    if fmt == "br4":
        need(4)
        rel = struct.unpack(">i", code[pos:pos + 4])[0]
        return (start + rel,), pos + 4
    if fmt == "iinc":
        need(2)
        return (code[pos], struct.unpack(">b", code[pos + 1:pos + 2])[0]), pos + 2
    if fmt == "ifc":
        need(4)
        index = struct.unpack(">H", code[pos:pos + 2])[0]
        count = code[pos + 2]
        return (index, count), pos + 4
    if fmt == "indy":
        need(4)
        index = struct.unpack(">H", code[pos:pos + 2])[0]
        return (index,), pos + 4
    if fmt == "manew":
        need(3)
        index = struct.unpack(">H", code[pos:pos + 2])[0]
        return (index, code[pos + 2]), pos + 3
    raise MalformedCode(f"{mnemonic} at {start}: unhandled operand format {fmt}")


def _decode_switch(code: bytes, pos: int, start: int, mnemonic: str) -> tuple[tuple, int]:
    pad = (4 - (pos % 4)) % 4
    pos += pad
    def s4(at: int) -> int:
        if at + 4 > len(code):
            raise MalformedCode(f"{mnemonic} at {start}: table overruns code")
        return struct.unpack(">i", code[at:at + 4])[0]

    default = start + s4(pos)
    pos += 4
    if mnemonic == "tableswitch":
        low = s4(pos)
        high = s4(pos + 4)
        pos += 8
        if low > high:
            raise MalformedCode(f"tableswitch at {start}: low {low} > high {high}")
        count = high - low + 1
        if pos + 4 * count > len(code):
            raise MalformedCode(f"tableswitch at {start}: {count} targets overrun code")
        targets = tuple(start + s4(pos + 4 * i) for i in range(count))
        return (default, low, high, targets), pos + 4 * count
    npairs = s4(pos)
    pos += 4
    if npairs < 0:
        raise MalformedCode(f"lookupswitch at {start}: negative pair count")
    if pos + 8 * npairs > len(code):
        raise MalformedCode(f"lookupswitch at {start}: {npairs} pairs overrun code")
    pairs = tuple(
        (s4(pos + 8 * i), start + s4(pos + 8 * i + 4)) for i in range(npairs)
    )
    return (default, pairs), pos + 8 * npairs


def branch_targets(instr: Instruction) -> tuple[int, ...]:
    """Absolute branch targets of a decoded instruction (empty if none)."""
    if instr.mnemonic == "tableswitch":
        default, _low, _high, targets = instr.operands
        return (default,) + targets
    if instr.mnemonic == "lookupswitch":
        default, pairs = instr.operands
        return (default,) + tuple(t for _m, t in pairs)
    fmt = OPCODES[instr.opcode][1]
    if fmt in ("br2", "br4"):
        return (instr.operands[0],)
    return ()


def decode_method_body(member: MemberInfo) -> CodeBody:
    """Decode a method's Code attribute into instructions.

    The caller must not invoke this on members without code (abstract
    or native methods).
    """
    if member.raw_code is None:
        raise ValueError(f"method {member.name!r} has no code attribute")
    if member._decoded is not None:
        return member._decoded
    raw = member.raw_code
    code = raw.bytecode
    instructions: list[Instruction] = []
    pos = 0
    while pos < len(code):
        start = pos
        op = code[pos]
        pos += 1
        if op == 0xC4:  # wide prefix
            if pos >= len(code):
                raise MalformedCode(f"wide at {start}: missing modified opcode")
            real = code[pos]
            pos += 1
            entry = OPCODES.get(real)
            if entry is None or entry[0] not in WIDE_ELIGIBLE:
                raise UnknownOpcode(f"wide prefix on opcode 0x{real:02x} at {start}")
            name = entry[0]
            if name == "iinc":
                if pos + 4 > len(code):
                    raise MalformedCode(f"wide iinc at {start}: operands overrun code")
                slot = struct.unpack(">H", code[pos:pos + 2])[0]
                const = struct.unpack(">h", code[pos + 2:pos + 4])[0]
                operands: tuple = (slot, const)
                pos += 4
            else:
                if pos + 2 > len(code):
                    raise MalformedCode(f"wide {name} at {start}: operands overrun code")
                operands = (struct.unpack(">H", code[pos:pos + 2])[0],)
                pos += 2
            instructions.append(Instruction(start, real, name, operands, wide=True))
            continue
        entry = OPCODES.get(op)
        if entry is None:
            raise UnknownOpcode(f"opcode 0x{op:02x} at offset {start}")
        name, fmt = entry
        if fmt == "switch":
            operands, pos = _decode_switch(code, pos, start, name)
        else:
            operands, pos = _decode_operands(code, pos, start, name, fmt)
        instructions.append(Instruction(start, op, name, operands))

    boundaries = {i.offset for i in instructions}
    for instr in instructions:
        for target in branch_targets(instr):
            if target not in boundaries:
                raise MalformedCode(
                    f"{instr.mnemonic} at {instr.offset}: target {target} "
                    f"is not an instruction boundary"
                )
    body = CodeBody(
        max_stack=raw.max_stack,
        max_locals=raw.max_locals,
        instructions=tuple(instructions),
        line_table=dict(raw.line_table) if raw.line_table is not None else None,
        handlers=raw.handlers,
    )
    member._decoded = body
    return body
