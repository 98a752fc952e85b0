"""Def-use construction and backward slicing from catalogued call sites.

Only methods that contain a catalogued call, or that are pulled onto a
slice path (callers during parameter flow, class initializers during
field resolution), ever get their def-use information built; everything
else stays as undecoded members. Slices resolve each watched argument
to a compile-time constant, a constant static field, or an Unknown with
a machine-readable reason.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .catalog import ApiTarget, Catalog
from .classfile import (
    ACC_FINAL,
    ACC_STATIC,
    ClassFile,
    ClassFileError,
    ConstantEntry,
    Instruction,
    MemberInfo,
    Tag,
    decode_method_body,
    fully_qualified_name,
    parse_method_descriptor,
    type_width,
)
from .intake import ScanSet

DEFAULT_MAX_DEPTH = 3

REASON_DEPTH = "depth_exceeded"
REASON_DYNAMIC = "dynamic_value"
REASON_UNSUPPORTED = "unsupported_construct"
REASON_EXTERNAL = "external_input"


class StackUnderflow(Exception):
    """Method bytecode pops more values than the stack holds."""


class TagMismatch(Exception):
    """Constant resolution applied to a pool entry of the wrong tag."""


MethodKey = tuple[str, str, str]  # (owner fqn, name, descriptor)


@dataclass(frozen=True)
class SliceCriterion:
    """A call site of a catalogued API whose arguments need explaining."""

    owner_fqn: str
    method_name: str
    method_descriptor: str
    offset: int
    target: ApiTarget
    watched_arg_indices: tuple[int, ...]
    source_line: Optional[int] = None

    @property
    def method_key(self) -> MethodKey:
        return (self.owner_fqn, self.method_name, self.method_descriptor)

    @property
    def method_signature(self) -> str:
        return self.method_name + self.method_descriptor


@dataclass(frozen=True)
class Constant:
    value: object


@dataclass(frozen=True)
class FieldConstant:
    owner: str
    name: str
    value: object


@dataclass(frozen=True)
class Unknown:
    reason: str


Resolution = Constant | FieldConstant | Unknown


@dataclass(frozen=True)
class Slice:
    criterion: SliceCriterion
    resolved_args: dict[int, Resolution]
    depth_reached: int


# ---------------------------------------------------------------------------
# Abstract values flowing through the simulated operand stack.

@dataclass(frozen=True)
class AConst:
    value: object


@dataclass(frozen=True)
class ALocal:
    slot: int
    defs: frozenset  # int store offsets and/or ("param", index) markers


@dataclass(frozen=True)
class AStatic:
    owner: str
    name: str
    descriptor: str


@dataclass(frozen=True)
class AArrayRef:
    array_id: int  # bytecode offset of the creating instruction


@dataclass(frozen=True)
class AOpaque:
    reason: str


@dataclass(frozen=True)
class AMerge:
    values: frozenset


_TOP = object()  # second stack slot of a long/double value


class _ArrayState:
    """Tracks an array built from per-element constant stores.

    Any write outside the creating basic block, any non-constant index
    or value, and any write through an unsupported store poisons it.
    """

    __slots__ = ("kind", "length", "elements", "poisoned", "block")

    def __init__(self, kind: str, length: Optional[int], block: int):
        self.kind = kind
        self.length = length
        self.elements: dict[int, object] = {}
        self.poisoned: Optional[str] = None if length is not None else REASON_UNSUPPORTED
        self.block = block

    def write(self, index: object, value: object, block: int) -> None:
        if self.poisoned:
            return
        if block != self.block:
            self.poisoned = REASON_UNSUPPORTED
            return
        if not isinstance(index, AConst) or not isinstance(value, AConst):
            self.poisoned = REASON_UNSUPPORTED
            return
        if not isinstance(index.value, int) or not (0 <= index.value < self.length):
            self.poisoned = REASON_UNSUPPORTED
            return
        self.elements[index.value] = value.value

    def as_constant(self) -> Optional[object]:
        if self.poisoned or self.length is None:
            return None
        if self.kind == "byte":
            try:
                return bytes(
                    self.elements.get(i, 0) & 0xFF for i in range(self.length)
                )
            except TypeError:
                return None
        if self.kind == "char":
            try:
                return "".join(
                    chr(self.elements.get(i, 0)) for i in range(self.length)
                )
            except (TypeError, ValueError):
                return None
        return None


@dataclass
class MethodIR:
    """Per-method def-use information from one simulated linear pass."""

    owner_fqn: str
    name: str
    descriptor: str
    instructions: tuple[Instruction, ...]
    defs: dict[int, tuple[int, ...]]             # local slot -> def offsets
    uses: dict[int, tuple]                       # offset -> consumed values
    invoke_args: dict[int, tuple]                # offset -> declared-arg values
    invoke_targets: dict[int, tuple[str, str, str]]
    stored_values: dict[int, object]             # store offset -> stored value
    putstatics: dict[int, tuple[str, str, object]]
    arrays: dict[int, _ArrayState]               # creation offset -> state
    poisoned_arrays: set[int]                    # creation offsets, sticky
    param_slots: dict[int, int]                  # local slot -> param index

    @property
    def key(self) -> MethodKey:
        return (self.owner_fqn, self.name, self.descriptor)


_LOAD_PREFIXES = ("iload", "lload", "fload", "dload", "aload")
_STORE_PREFIXES = ("istore", "lstore", "fstore", "dstore", "astore")
_CONST_TABLE = {
    "aconst_null": None,
    "iconst_m1": -1, "iconst_0": 0, "iconst_1": 1, "iconst_2": 2,
    "iconst_3": 3, "iconst_4": 4, "iconst_5": 5,
    "lconst_0": 0, "lconst_1": 1,
    "fconst_0": 0.0, "fconst_1": 1.0, "fconst_2": 2.0,
    "dconst_0": 0.0, "dconst_1": 1.0,
}
_WIDE_CONST = ("lconst_0", "lconst_1", "dconst_0", "dconst_1")
_NEWARRAY_KIND = {
    4: "boolean", 5: "char", 6: "float", 7: "double",
    8: "byte", 9: "short", 10: "int", 11: "long",
}

_BINARY_INT = {"iadd", "isub", "imul", "idiv", "irem", "ishl", "ishr", "iushr",
               "iand", "ior", "ixor", "fadd", "fsub", "fmul", "fdiv", "frem"}
_BINARY_WIDE = {"ladd", "lsub", "lmul", "ldiv", "lrem", "land", "lor", "lxor",
                "dadd", "dsub", "dmul", "ddiv", "drem"}
_ARRAY_LOAD = {"iaload": 1, "laload": 2, "faload": 1, "daload": 2,
               "aaload": 1, "baload": 1, "caload": 1, "saload": 1}
_ARRAY_STORE_NARROW = {"iastore", "fastore", "aastore", "bastore", "castore", "sastore"}
_ARRAY_STORE_WIDE = {"lastore", "dastore"}
_CONVERSIONS = {  # mnemonic -> (pop slots, push slots)
    "i2l": (1, 2), "i2f": (1, 1), "i2d": (1, 2),
    "l2i": (2, 1), "l2f": (2, 1), "l2d": (2, 2),
    "f2i": (1, 1), "f2l": (1, 2), "f2d": (1, 2),
    "d2i": (2, 1), "d2l": (2, 2), "d2f": (2, 1),
    "i2b": (1, 1), "i2c": (1, 1), "i2s": (1, 1),
}
_COMPARES = {"lcmp": 4, "fcmpl": 2, "fcmpg": 2, "dcmpl": 4, "dcmpg": 4}
_IF_ONE = {"ifeq", "ifne", "iflt", "ifge", "ifgt", "ifle", "ifnull", "ifnonnull"}
_IF_TWO = {"if_icmpeq", "if_icmpne", "if_icmplt", "if_icmpge", "if_icmpgt",
           "if_icmple", "if_acmpeq", "if_acmpne"}
_RETURN_POP = {"ireturn": 1, "freturn": 1, "areturn": 1,
               "lreturn": 2, "dreturn": 2, "return": 0}
_TERMINATORS = {"goto", "goto_w", "athrow", "ret", "tableswitch", "lookupswitch",
                *_RETURN_POP}


def parameter_slots(descriptor: str, is_static: bool) -> dict[int, int]:
    """Map local-variable slots to declared parameter indices.

    The receiver slot of instance methods maps to -1: it is not an
    argument and never flows.
    """
    params, _ret = parse_method_descriptor(descriptor)
    slots: dict[int, int] = {}
    slot = 0
    if not is_static:
        slots[0] = -1
        slot = 1
    for index, ptype in enumerate(params):
        slots[slot] = index
        slot += type_width(ptype)
    return slots


def _instruction_blocks(instructions: tuple[Instruction, ...],
                        handler_pcs: set[int]) -> tuple[list[list[Instruction]], dict[int, int], dict[int, list[int]]]:
    """Partition into basic blocks; returns (blocks, offset->block, successors)."""
    from .classfile import branch_targets

    leaders = {instructions[0].offset} | set(handler_pcs)
    by_offset = {i.offset: idx for idx, i in enumerate(instructions)}
    for idx, instr in enumerate(instructions):
        targets = branch_targets(instr)
        leaders.update(targets)
        ends_flow = instr.mnemonic in _TERMINATORS
        if (targets or ends_flow) and idx + 1 < len(instructions):
            leaders.add(instructions[idx + 1].offset)

    blocks: list[list[Instruction]] = []
    block_of: dict[int, int] = {}
    current: list[Instruction] = []
    for instr in instructions:
        if instr.offset in leaders and current:
            blocks.append(current)
            current = []
        current.append(instr)
        block_of[instr.offset] = len(blocks)
    if current:
        blocks.append(current)

    successors: dict[int, list[int]] = {}
    for bid, block in enumerate(blocks):
        last = block[-1]
        succ: list[int] = []
        targets = branch_targets(last)
        for t in targets:
            succ.append(block_of[t])
        if last.mnemonic not in _TERMINATORS:
            follow = last.offset
            idx = by_offset[follow] + 1
            if idx < len(instructions):
                succ.append(block_of[instructions[idx].offset])
        successors[bid] = succ
    return blocks, block_of, successors


def _reaching_definitions(blocks, successors, param_slots):
    """Worklist reaching-defs over blocks; merge points union definitions.

    Returns per-block entry state: slot -> frozenset of def markers.
    """
    gen_kill = []
    for block in blocks:
        gen: dict[int, int] = {}
        for instr in block:
            slot = _def_slot(instr)
            if slot is not None:
                gen[slot] = instr.offset
        gen_kill.append(gen)

    entry_state = {slot: frozenset({("param", idx)})
                   for slot, idx in param_slots.items()}
    ins: list[dict[int, frozenset]] = [dict() for _ in blocks]
    ins[0] = dict(entry_state)
    preds: dict[int, list[int]] = {b: [] for b in range(len(blocks))}
    for bid, succ in successors.items():
        for s in succ:
            preds[s].append(bid)

    def out_of(bid: int) -> dict[int, frozenset]:
        state = dict(ins[bid])
        for slot, off in gen_kill[bid].items():
            state[slot] = frozenset({off})
        # within-block multiple defs of one slot: last wins, handled by dict
        return state

    work = list(range(len(blocks)))
    iterations = 0
    limit = 200 * (len(blocks) + 1)
    while work:
        iterations += 1
        if iterations > limit:
            break  # merge is monotone so this cannot trigger; belt and braces
        bid = work.pop(0)
        merged: dict[int, frozenset] = dict(ins[bid])
        for p in preds[bid]:
            for slot, defs in out_of(p).items():
                merged[slot] = merged.get(slot, frozenset()) | defs
        if bid == 0:
            for slot, defs in entry_state.items():
                merged[slot] = merged.get(slot, frozenset()) | defs
        if merged != ins[bid]:
            ins[bid] = merged
            for s in successors[bid]:
                if s not in work:
                    work.append(s)
    # all_defs: handlers see every def conservatively; computed by caller
    return ins


def _def_slot(instr: Instruction) -> Optional[int]:
    m = instr.mnemonic
    if m == "iinc":
        return instr.operands[0]
    for prefix in _STORE_PREFIXES:
        if m == prefix:
            return instr.operands[0]
        if m.startswith(prefix + "_"):
            return int(m.rsplit("_", 1)[1])
    return None


def _load_slot(instr: Instruction) -> Optional[tuple[int, bool]]:
    m = instr.mnemonic
    for prefix in _LOAD_PREFIXES:
        wide = prefix in ("lload", "dload")
        if m == prefix:
            return instr.operands[0], wide
        if m.startswith(prefix + "_"):
            return int(m.rsplit("_", 1)[1]), wide
    return None


def _store_slot(instr: Instruction) -> Optional[tuple[int, bool]]:
    m = instr.mnemonic
    for prefix in _STORE_PREFIXES:
        wide = prefix in ("lstore", "dstore")
        if m == prefix:
            return instr.operands[0], wide
        if m.startswith(prefix + "_"):
            return int(m.rsplit("_", 1)[1]), wide
    return None


def _array_ids_of(value, stored_values: dict[int, object],
                  visited: Optional[set] = None) -> set[int]:
    """Creation offsets of every tracked array reachable through value.

    Walks local-variable chains so writes through aliases can poison
    the states they may refer to.
    """
    if visited is None:
        visited = set()
    if isinstance(value, AArrayRef):
        return {value.array_id}
    if isinstance(value, AMerge):
        out: set[int] = set()
        for part in value.values:
            out |= _array_ids_of(part, stored_values, visited)
        return out
    if isinstance(value, ALocal):
        out = set()
        for marker in value.defs:
            if isinstance(marker, int) and marker not in visited:
                visited.add(marker)
                stored = stored_values.get(marker)
                if stored is not None:
                    out |= _array_ids_of(stored, stored_values, visited)
        return out
    return set()


def _merge_values(a: object, b: object) -> object:
    if a == b:
        return a
    parts = set()
    for v in (a, b):
        if isinstance(v, AMerge):
            parts.update(v.values)
        else:
            parts.add(v)
    return AMerge(frozenset(parts))


def _merge_stacks(old: list, new: list) -> tuple[list, bool]:
    if len(old) != len(new):
        raise StackUnderflow(
            f"inconsistent stack depth at merge: {len(old)} vs {len(new)}"
        )
    changed = False
    merged = []
    for a, b in zip(old, new):
        if a is _TOP or b is _TOP:
            if a is not b:
                raise StackUnderflow("wide-value slot misalignment at merge")
            merged.append(_TOP)
            continue
        m = _merge_values(a, b)
        if m != a:
            changed = True
        merged.append(m)
    return merged, changed


def build_method_ir(cf: ClassFile, member: MemberInfo) -> MethodIR:
    """Compute defs/uses for one method by simulating the operand stack.

    Merge points union definitions; loops run to a fixpoint. Raises
    StackUnderflow on malformed code (callers treat this per-method,
    not fatally).
    """
    body = decode_method_body(member)
    owner = fully_qualified_name(cf)
    instructions = body.instructions
    if not instructions:
        raise StackUnderflow(f"{owner}.{member.name}: empty code array")
    param_slots = parameter_slots(member.descriptor, member.is_static)
    handler_pcs = {h.handler_pc for h in body.handlers}
    blocks, block_of, successors = _instruction_blocks(instructions, handler_pcs)
    block_entry_defs = _reaching_definitions(blocks, successors, param_slots)

    # Conservative def view for exception handler entries: any def in the
    # method (plus parameters) may reach the handler.
    every_def: dict[int, frozenset] = {
        slot: frozenset({("param", idx)}) for slot, idx in param_slots.items()
    }
    for block in blocks:
        for instr in block:
            slot = _def_slot(instr)
            if slot is not None:
                every_def[slot] = every_def.get(slot, frozenset()) | {instr.offset}
    handler_blocks = {block_of[pc] for pc in handler_pcs if pc in block_of}

    defs: dict[int, list[int]] = {}
    uses: dict[int, tuple] = {}
    invoke_args: dict[int, tuple] = {}
    invoke_targets: dict[int, tuple[str, str, str]] = {}
    stored_values: dict[int, object] = {}
    putstatics: dict[int, tuple[str, str, object]] = {}
    arrays: dict[int, _ArrayState] = {}
    poisoned_arrays: set[int] = set()  # survives block re-simulation

    def poison_through(ref) -> None:
        poisoned_arrays.update(_array_ids_of(ref, stored_values))

    entry_stacks: dict[int, list] = {0: []}
    for hb in handler_blocks:
        entry_stacks.setdefault(hb, [AOpaque(REASON_DYNAMIC)])
    if 0 in handler_blocks:
        entry_stacks[0] = []

    work = [0] + sorted(handler_blocks - {0})
    visits: dict[int, int] = {}
    limit = 60

    def pop(stack: list, offset: int, n: int = 1) -> list:
        if len(stack) < n:
            raise StackUnderflow(
                f"{owner}.{member.name}: pop of empty stack at offset {offset}"
            )
        taken = stack[-n:]
        del stack[-n:]
        return taken

    while work:
        bid = work.pop(0)
        visits[bid] = visits.get(bid, 0) + 1
        if visits[bid] > limit:
            raise StackUnderflow(
                f"{owner}.{member.name}: no simulation fixpoint in block {bid}"
            )
        stack = list(entry_stacks.get(bid, []))
        local_defs = dict(block_entry_defs[bid]) if bid not in handler_blocks else dict(every_def)
        if bid == 0:
            for slot, idx in param_slots.items():
                local_defs.setdefault(slot, frozenset({("param", idx)}))

        for instr in blocks[bid]:
            m = instr.mnemonic
            offset = instr.offset
            consumed: list = []

            if m in _CONST_TABLE:
                stack.append(AConst(_CONST_TABLE[m]))
                if m in _WIDE_CONST:
                    stack.append(_TOP)
            elif m in ("bipush", "sipush"):
                stack.append(AConst(instr.operands[0]))
            elif m in ("ldc", "ldc_w", "ldc2_w"):
                value = _ldc_value(cf, instr.operands[0])
                stack.append(value)
                consumed.append(value)  # reads a pool constant
                if m == "ldc2_w":
                    stack.append(_TOP)
            elif _load_slot(instr) is not None:
                slot, wide = _load_slot(instr)
                reaching = local_defs.get(slot, frozenset())
                value = ALocal(slot, reaching)
                stack.append(value)
                consumed.append(value)  # reads a local slot
                if wide:
                    stack.append(_TOP)
            elif _store_slot(instr) is not None:
                slot, wide = _store_slot(instr)
                taken = pop(stack, offset, 2 if wide else 1)
                value = taken[0]
                consumed.append(value)
                stored_values[offset] = value
                defs.setdefault(slot, []).append(offset)
                local_defs[slot] = frozenset({offset})
            elif m == "iinc":
                slot = instr.operands[0]
                stored_values[offset] = AOpaque(REASON_UNSUPPORTED)
                defs.setdefault(slot, []).append(offset)
                local_defs[slot] = frozenset({offset})
            elif m in _ARRAY_LOAD:
                consumed.extend(pop(stack, offset, 2))
                stack.append(AOpaque(REASON_DYNAMIC))
                if _ARRAY_LOAD[m] == 2:
                    stack.append(_TOP)
            elif m in _ARRAY_STORE_NARROW or m in _ARRAY_STORE_WIDE:
                width = 2 if m in _ARRAY_STORE_WIDE else 1
                taken = pop(stack, offset, 2 + width)
                ref, index, value = taken[0], taken[1], taken[2]
                consumed.extend([ref, index, value])
                if (isinstance(ref, AArrayRef)
                        and m in ("bastore", "castore", "iastore", "sastore")):
                    state = arrays.get(ref.array_id)
                    if state is not None:
                        state.write(index, value, bid)
                        if state.poisoned:
                            poisoned_arrays.add(ref.array_id)
                else:
                    # write through an alias or an untracked kind: poison
                    # everything the reference may point at
                    poison_through(ref)
            elif m == "pop":
                consumed.extend(pop(stack, offset, 1))
            elif m == "pop2":
                consumed.extend(pop(stack, offset, 2))
            elif m == "dup":
                top = pop(stack, offset, 1)[0]
                stack.extend([top, top])
            elif m == "dup_x1":
                v2, v1 = pop(stack, offset, 2)
                stack.extend([v1, v2, v1])
            elif m == "dup_x2":
                v3, v2, v1 = pop(stack, offset, 3)
                stack.extend([v1, v3, v2, v1])
            elif m == "dup2":
                v2, v1 = pop(stack, offset, 2)
                stack.extend([v2, v1, v2, v1])
            elif m == "dup2_x1":
                v3, v2, v1 = pop(stack, offset, 3)
                stack.extend([v2, v1, v3, v2, v1])
            elif m == "dup2_x2":
                v4, v3, v2, v1 = pop(stack, offset, 4)
                stack.extend([v2, v1, v4, v3, v2, v1])
            elif m == "swap":
                v2, v1 = pop(stack, offset, 2)
                stack.extend([v1, v2])
            elif m in _BINARY_INT:
                consumed.extend(pop(stack, offset, 2))
                stack.append(AOpaque(REASON_UNSUPPORTED))
            elif m in _BINARY_WIDE:
                consumed.extend(pop(stack, offset, 4))
                stack.extend([AOpaque(REASON_UNSUPPORTED), _TOP])
            elif m in ("lshl", "lshr", "lushr"):
                consumed.extend(pop(stack, offset, 3))  # long + int shift
                stack.extend([AOpaque(REASON_UNSUPPORTED), _TOP])
            elif m in ("ineg", "fneg"):
                consumed.extend(pop(stack, offset, 1))
                stack.append(AOpaque(REASON_UNSUPPORTED))
            elif m in ("lneg", "dneg"):
                consumed.extend(pop(stack, offset, 2))
                stack.extend([AOpaque(REASON_UNSUPPORTED), _TOP])
            elif m in _CONVERSIONS:
                popped, pushed = _CONVERSIONS[m]
                consumed.extend(pop(stack, offset, popped))
                stack.append(AOpaque(REASON_UNSUPPORTED))
                if pushed == 2:
                    stack.append(_TOP)
            elif m in _COMPARES:
                consumed.extend(pop(stack, offset, _COMPARES[m]))
                stack.append(AOpaque(REASON_UNSUPPORTED))
            elif m in _IF_ONE:
                consumed.extend(pop(stack, offset, 1))
            elif m in _IF_TWO:
                consumed.extend(pop(stack, offset, 2))
            elif m in ("goto", "goto_w"):
                pass
            elif m in ("jsr", "jsr_w"):
                stack.append(AOpaque(REASON_UNSUPPORTED))
            elif m == "ret":
                pass
            elif m in ("tableswitch", "lookupswitch"):
                consumed.extend(pop(stack, offset, 1))
            elif m in _RETURN_POP:
                n = _RETURN_POP[m]
                if n:
                    consumed.extend(pop(stack, offset, n))
            elif m == "getstatic":
                owner_i, name, desc = cf.member_ref(instr.operands[0])
                value = AStatic(owner_i.replace("/", "."), name, desc)
                stack.append(value)
                consumed.append(value)  # reads a field
                if type_width(desc) == 2:
                    stack.append(_TOP)
            elif m == "putstatic":
                owner_i, name, desc = cf.member_ref(instr.operands[0])
                taken = pop(stack, offset, type_width(desc))
                consumed.append(taken[0])
                putstatics[offset] = (owner_i.replace("/", "."), name, taken[0])
            elif m == "getfield":
                owner_i, name, desc = cf.member_ref(instr.operands[0])
                consumed.extend(pop(stack, offset, 1))
                stack.append(AOpaque(REASON_DYNAMIC))
                if type_width(desc) == 2:
                    stack.append(_TOP)
            elif m == "putfield":
                owner_i, name, desc = cf.member_ref(instr.operands[0])
                consumed.extend(pop(stack, offset, 1 + type_width(desc)))
            elif m in ("invokevirtual", "invokespecial", "invokestatic",
                       "invokeinterface"):
                owner_i, name, desc = cf.member_ref(instr.operands[0])
                params, ret = parse_method_descriptor(desc)
                args: list = []
                for ptype in reversed(params):
                    taken = pop(stack, offset, type_width(ptype))
                    args.append(taken[0])
                args.reverse()
                if m != "invokestatic":
                    consumed.extend(pop(stack, offset, 1))  # receiver
                consumed.extend(args)
                invoke_args[offset] = tuple(args)
                invoke_targets[offset] = (owner_i.replace("/", "."), name, desc)
                if ret != "V":
                    stack.append(AOpaque(REASON_DYNAMIC))
                    if type_width(ret) == 2:
                        stack.append(_TOP)
            elif m == "invokedynamic":
                ent = cf.entry(instr.operands[0])
                if ent.tag is not Tag.INVOKE_DYNAMIC:
                    raise StackUnderflow(f"{owner}.{member.name}: bad invokedynamic pool ref")
                _bootstrap, nat_index = ent.payload
                nat = cf.entry(nat_index)
                desc = cf.utf8(nat.payload[1])
                params, ret = parse_method_descriptor(desc)
                for ptype in reversed(params):
                    consumed.extend(pop(stack, offset, type_width(ptype)))
                if ret != "V":
                    stack.append(AOpaque(REASON_UNSUPPORTED))
                    if type_width(ret) == 2:
                        stack.append(_TOP)
            elif m == "new":
                stack.append(AOpaque(REASON_DYNAMIC))
            elif m == "newarray":
                count = pop(stack, offset, 1)[0]
                consumed.append(count)
                kind = _NEWARRAY_KIND.get(instr.operands[0], "other")
                length = count.value if isinstance(count, AConst) and isinstance(count.value, int) else None
                arrays[offset] = _ArrayState(kind, length, bid)
                stack.append(AArrayRef(offset))
            elif m in ("anewarray", "multianewarray"):
                n = 1 if m == "anewarray" else instr.operands[1]
                consumed.extend(pop(stack, offset, n))
                arrays[offset] = _ArrayState("object", None, bid)
                poisoned_arrays.add(offset)
                stack.append(AArrayRef(offset))
            elif m == "arraylength":
                consumed.extend(pop(stack, offset, 1))
                stack.append(AOpaque(REASON_DYNAMIC))
            elif m == "athrow":
                consumed.extend(pop(stack, offset, 1))
            elif m in ("monitorenter", "monitorexit"):
                consumed.extend(pop(stack, offset, 1))
            elif m == "nop":
                pass
            elif m in ("checkcast",):
                top = pop(stack, offset, 1)[0]
                stack.append(top)
            elif m == "instanceof":
                consumed.extend(pop(stack, offset, 1))
                stack.append(AOpaque(REASON_DYNAMIC))
            else:
                raise StackUnderflow(
                    f"{owner}.{member.name}: unhandled mnemonic {m} at {offset}"
                )

            if consumed:
                uses[offset] = tuple(v for v in consumed if v is not _TOP)

        for succ in successors[bid]:
            if succ in handler_blocks:
                continue  # handler entries keep their exception-only stack
            if succ not in entry_stacks:
                entry_stacks[succ] = list(stack)
                if succ not in work:
                    work.append(succ)
            else:
                merged, changed = _merge_stacks(entry_stacks[succ], stack)
                if changed:
                    entry_stacks[succ] = merged
                    if succ not in work:
                        work.append(succ)

    return MethodIR(
        owner_fqn=owner,
        name=member.name,
        descriptor=member.descriptor,
        instructions=instructions,
        defs={slot: tuple(sorted(set(offs))) for slot, offs in defs.items()},
        uses=uses,
        invoke_args=invoke_args,
        invoke_targets=invoke_targets,
        stored_values=stored_values,
        putstatics=putstatics,
        arrays=arrays,
        poisoned_arrays=poisoned_arrays,
        param_slots=param_slots,
    )


def _ldc_value(cf: ClassFile, index: int):
    ent = cf.entry(index)
    if ent.tag in (Tag.INTEGER, Tag.FLOAT, Tag.LONG, Tag.DOUBLE):
        return AConst(ent.payload)
    if ent.tag is Tag.STRING_REF:
        return AConst(cf.utf8(ent.payload))
    return AOpaque(REASON_DYNAMIC)  # class literals, method types/handles


def resolve_constant(entry: ConstantEntry, pool: tuple[ConstantEntry, ...]):
    """Decode a loadable pool constant; StringRef follows one indirection."""
    if entry.tag in (Tag.UTF8, Tag.INTEGER, Tag.LONG, Tag.FLOAT, Tag.DOUBLE):
        return entry.payload
    if entry.tag is Tag.STRING_REF:
        target = pool[entry.payload]
        if target.tag is not Tag.UTF8:
            raise TagMismatch(f"StringRef points at {target.tag.value}")
        return target.payload
    raise TagMismatch(f"{entry.tag.value} is not a resolvable constant tag")


class IrIndex:
    """Lazy per-method IR store over one scan set.

    IR is built only on request; `built_keys` records exactly which
    methods were ever built (the restriction the slicer relies on).
    """

    def __init__(self, scan_set: ScanSet):
        self.scan_set = scan_set
        self.classes: dict[str, ClassFile] = {}
        for cf in scan_set.classes:
            self.classes.setdefault(fully_qualified_name(cf), cf)
        self._ir_cache: dict[MethodKey, Optional[MethodIR]] = {}
        self._callers: Optional[dict[MethodKey, list[tuple[MethodKey, int]]]] = None
        self.built_keys: list[MethodKey] = []
        self.ir_errors: dict[MethodKey, str] = {}

    def class_by_fqn(self, fqn: str) -> Optional[ClassFile]:
        return self.classes.get(fqn)

    def method(self, key: MethodKey) -> Optional[tuple[ClassFile, MemberInfo]]:
        cf = self.classes.get(key[0])
        if cf is None:
            return None
        member = cf.find_method(key[1], key[2])
        if member is None:
            return None
        return cf, member

    def get_ir(self, key: MethodKey) -> Optional[MethodIR]:
        if key in self._ir_cache:
            return self._ir_cache[key]
        located = self.method(key)
        if located is None or not located[1].has_code:
            self._ir_cache[key] = None
            return None
        cf, member = located
        try:
            ir = build_method_ir(cf, member)
            self.built_keys.append(key)
        except (StackUnderflow, ClassFileError) as exc:
            self.ir_errors[key] = str(exc)
            ir = None
        self._ir_cache[key] = ir
        return ir

    def callers_of(self, key: MethodKey) -> list[tuple[MethodKey, int]]:
        """All call sites of `key` across the scan set (decode-only scan)."""
        if self._callers is None:
            callers: dict[MethodKey, list[tuple[MethodKey, int]]] = {}
            for fqn in sorted(self.classes):
                cf = self.classes[fqn]
                for member in cf.methods:
                    if not member.has_code:
                        continue
                    try:
                        body = decode_method_body(member)
                    except ClassFileError:
                        continue
                    for instr in body.instructions:
                        if instr.mnemonic in ("invokevirtual", "invokespecial",
                                              "invokestatic", "invokeinterface"):
                            try:
                                owner_i, name, desc = cf.member_ref(instr.operands[0])
                            except ClassFileError:
                                continue
                            target = (owner_i.replace("/", "."), name, desc)
                            caller = (fqn, member.name, member.descriptor)
                            callers.setdefault(target, []).append((caller, instr.offset))
            self._callers = callers
        return self._callers.get(key, [])


def find_criteria(scan_set: ScanSet, catalog: Catalog) -> list[SliceCriterion]:
    """Every invoke of a catalogued API, ordered by (class, method, offset)."""
    api = catalog.api_index()
    criteria: list[SliceCriterion] = []
    ordered = sorted(scan_set.classes, key=fully_qualified_name)
    for cf in ordered:
        fqn = fully_qualified_name(cf)
        for member in sorted(cf.methods, key=lambda mem: (mem.name, mem.descriptor)):
            if not member.has_code:
                continue
            try:
                body = decode_method_body(member)
            except ClassFileError:
                continue
            for instr in body.instructions:
                if instr.mnemonic not in ("invokevirtual", "invokespecial",
                                          "invokestatic", "invokeinterface"):
                    continue
                try:
                    owner_i, name, desc = cf.member_ref(instr.operands[0])
                except ClassFileError:
                    continue
                target = ApiTarget(owner_i.replace("/", "."), name, desc)
                entry = api.get(target)
                if entry is None:
                    continue
                criteria.append(SliceCriterion(
                    owner_fqn=fqn,
                    method_name=member.name,
                    method_descriptor=member.descriptor,
                    offset=instr.offset,
                    target=target,
                    watched_arg_indices=entry.watched,
                    source_line=body.line_for_offset(instr.offset),
                ))
    return criteria


class _DepthTracker:
    __slots__ = ("max_used",)

    def __init__(self):
        self.max_used = 0


def _combine(resolutions: list[Resolution]) -> Resolution:
    unknowns = [r for r in resolutions if isinstance(r, Unknown)]
    if unknowns:
        return unknowns[0]
    values = {(_value_key(r)) for r in resolutions}
    if len(values) != 1:
        return Unknown(REASON_DYNAMIC)
    for r in resolutions:
        if isinstance(r, Constant):
            return r
    return resolutions[0]


def _value_key(r: Resolution):
    v = r.value
    return (type(v).__name__, v)


def _resolve_value(value, ir: MethodIR, index: "IrIndex", depth: int,
                   visited: set, tracker: _DepthTracker, max_depth: int) -> Resolution:
    if isinstance(value, AConst):
        return Constant(value.value)
    if isinstance(value, AOpaque):
        return Unknown(value.reason)
    if isinstance(value, AMerge):
        parts = [
            _resolve_value(v, ir, index, depth, visited, tracker, max_depth)
            for v in sorted(value.values, key=repr)
        ]
        return _combine(parts)
    if isinstance(value, AArrayRef):
        state = ir.arrays.get(value.array_id)
        if state is None:
            return Unknown(REASON_UNSUPPORTED)
        if value.array_id in ir.poisoned_arrays or state.poisoned:
            return Unknown(state.poisoned or REASON_UNSUPPORTED)
        const = state.as_constant()
        if const is None:
            return Unknown(REASON_UNSUPPORTED)
        return Constant(const)
    if isinstance(value, AStatic):
        return _resolve_static(value, index, depth, visited, tracker, max_depth)
    if isinstance(value, ALocal):
        if not value.defs:
            return Unknown(REASON_DYNAMIC)
        parts: list[Resolution] = []
        for marker in sorted(value.defs, key=repr):
            if isinstance(marker, tuple) and marker[0] == "param":
                parts.append(_resolve_param(marker[1], ir, index, depth,
                                            visited, tracker, max_depth))
            else:
                stored = ir.stored_values.get(marker)
                if stored is None:
                    parts.append(Unknown(REASON_UNSUPPORTED))
                else:
                    parts.append(_resolve_value(stored, ir, index, depth,
                                                visited, tracker, max_depth))
        return _combine(parts)
    return Unknown(REASON_UNSUPPORTED)


def _resolve_static(value: AStatic, index: "IrIndex", depth: int,
                    visited: set, tracker: _DepthTracker, max_depth: int) -> Resolution:
    key = ("field", value.owner, value.name)
    if key in visited:
        return Unknown(REASON_DYNAMIC)
    cf = index.class_by_fqn(value.owner)
    if cf is None:
        return Unknown(REASON_DYNAMIC)
    member = cf.find_field(value.name)
    if member is None:
        return Unknown(REASON_DYNAMIC)
    if member.constant_value is not None:
        return FieldConstant(value.owner, value.name, member.constant_value)
    if not (member.access_flags & ACC_STATIC) or not (member.access_flags & ACC_FINAL):
        return Unknown(REASON_DYNAMIC)
    clinit = index.get_ir((value.owner, "<clinit>", "()V"))
    if clinit is None:
        return Unknown(REASON_DYNAMIC)
    assignments = [
        stored for _off, (owner, name, stored) in sorted(clinit.putstatics.items())
        if owner == value.owner and name == value.name
    ]
    if len(assignments) != 1:
        return Unknown(REASON_DYNAMIC)
    inner = _resolve_value(assignments[0], clinit, index, depth,
                           visited | {key}, tracker, max_depth)
    if isinstance(inner, Constant):
        return FieldConstant(value.owner, value.name, inner.value)
    if isinstance(inner, FieldConstant):
        return FieldConstant(value.owner, value.name, inner.value)
    return inner


def _resolve_param(param_index: int, ir: MethodIR, index: "IrIndex", depth: int,
                   visited: set, tracker: _DepthTracker, max_depth: int) -> Resolution:
    if param_index < 0:
        return Unknown(REASON_DYNAMIC)  # receiver
    if depth >= max_depth:
        return Unknown(REASON_DEPTH)
    key = ("param", ir.key, param_index)
    if key in visited:
        return Unknown(REASON_DYNAMIC)
    callers = index.callers_of(ir.key)
    if not callers:
        return Unknown(REASON_EXTERNAL)
    tracker.max_used = max(tracker.max_used, depth + 1)
    parts: list[Resolution] = []
    for caller_key, offset in callers:
        caller_ir = index.get_ir(caller_key)
        if caller_ir is None:
            parts.append(Unknown(REASON_UNSUPPORTED))
            continue
        args = caller_ir.invoke_args.get(offset)
        if args is None or param_index >= len(args):
            parts.append(Unknown(REASON_UNSUPPORTED))
            continue
        parts.append(_resolve_value(args[param_index], caller_ir, index,
                                    depth + 1, visited | {key}, tracker, max_depth))
    return _combine(parts)


def backward_slice(criterion: SliceCriterion, ir_index: IrIndex,
                   max_depth: int = DEFAULT_MAX_DEPTH) -> Slice:
    """Resolve each watched argument of one criterion.

    Pool constants, constant static fields, straight-line constant
    arrays and direct parameter flows (up to max_depth caller hops)
    resolve; everything else yields Unknown with a reason.
    """
    tracker = _DepthTracker()
    ir = ir_index.get_ir(criterion.method_key)
    resolved: dict[int, Resolution] = {}
    for arg_index in criterion.watched_arg_indices:
        if ir is None:
            resolved[arg_index] = Unknown(REASON_UNSUPPORTED)
            continue
        args = ir.invoke_args.get(criterion.offset)
        if args is None or arg_index >= len(args):
            resolved[arg_index] = Unknown(REASON_UNSUPPORTED)
            continue
        resolved[arg_index] = _resolve_value(
            args[arg_index], ir, ir_index, 0, set(), tracker, max_depth
        )
    return Slice(criterion=criterion, resolved_args=resolved,
                 depth_reached=tracker.max_used)
