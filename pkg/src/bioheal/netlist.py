"""Function-block netlist DSL, validation, placement onto cells, direct evaluation.

Grammar (one statement per line, ``#`` starts a comment)::

    in <name>:bool|word
    level <k>:
    blk <name> = <OP>(<operand>, ...)
    out <name> = <operand>

Operands are input or block names, integer literals, or ``@symbol``
constants bound at placement time.  MUX2 operands are ``(a, b, sel)``.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .blocks import WORD_MASK, BlockState, Op, PiGains, eval_block
from .fabric import UNUSED, CellAddr, Fabric, GeneticCode, Mode, cell, const, port

MAX_BLOCKS_PER_LEVEL = 8


class NetlistError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


class PlacementError(ValueError):
    pass


@dataclass(frozen=True)
class Block:
    name: str
    op: Op
    args: tuple
    level: int
    line: int = 0


@dataclass
class Netlist:
    inputs: dict = field(default_factory=dict)  # name -> "bool" | "word"
    blocks: dict = field(default_factory=dict)  # name -> Block, declaration order
    outputs: dict = field(default_factory=dict)  # name -> operand

    @property
    def levels(self):
        return sorted({b.level for b in self.blocks.values()})

    def opcode_multiset(self, level=None):
        ops = {}
        for b in self.blocks.values():
            if level is None or b.level == level:
                ops[b.op] = ops.get(b.op, 0) + 1
        return ops

    def symbols(self):
        return sorted({a[1:] for b in self.blocks.values() for a in b.args if isinstance(a, str) and a.startswith("@")})


_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_IN_RE = re.compile(rf"^in\s+({_IDENT})\s*:\s*(bool|word)$")
_LEVEL_RE = re.compile(r"^level\s+(\d+)\s*:$")
_BLK_RE = re.compile(rf"^blk\s+({_IDENT})\s*=\s*({_IDENT})\s*\((.*)\)$")
_OUT_RE = re.compile(rf"^out\s+({_IDENT})\s*=\s*(\S+)$")
_OPERAND_RE = re.compile(rf"^(?:{_IDENT}|@{_IDENT}|0x[0-9A-Fa-f]+|\d+)$")


def _operand(tok):
    if tok.startswith("@") or re.match(_IDENT + "$", tok):
        return tok
    return int(tok, 0) & WORD_MASK


def parse_netlist(text: str) -> Netlist:
    """Parse and validate; raises NetlistError listing every located problem."""
    nl = Netlist()
    errors = []
    level = 1
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _IN_RE.match(line):
            name, typ = m.groups()
            if name in nl.inputs or name in nl.blocks:
                errors.append(f"line {lineno}: duplicate name {name!r}")
            nl.inputs[name] = typ
        elif m := _LEVEL_RE.match(line):
            level = int(m.group(1))
            if level < 1:
                errors.append(f"line {lineno}: levels start at 1")
        elif m := _BLK_RE.match(line):
            name, opname, argtext = m.groups()
            if name in nl.inputs or name in nl.blocks:
                errors.append(f"line {lineno}: duplicate name {name!r}")
                continue
            try:
                op = Op[opname]
            except KeyError:
                errors.append(f"line {lineno}: unknown opcode {opname!r}")
                continue
            toks = [t.strip() for t in argtext.split(",")] if argtext.strip() else []
            bad = [t for t in toks if not _OPERAND_RE.match(t)]
            if bad:
                errors.append(f"line {lineno}: malformed operand {bad[0]!r}")
                continue
            if len(toks) != op.arity:
                errors.append(f"line {lineno}: {op.name} takes {op.arity} operands, got {len(toks)}")
                continue
            nl.blocks[name] = Block(name, op, tuple(_operand(t) for t in toks), level, lineno)
        elif m := _OUT_RE.match(line):
            name, tok = m.groups()
            if not _OPERAND_RE.match(tok) or tok.startswith("@"):
                errors.append(f"line {lineno}: malformed output source {tok!r}")
                continue
            if name in nl.outputs or name in nl.inputs or name in nl.blocks:
                errors.append(f"line {lineno}: duplicate name {name!r}")
            nl.outputs[name] = _operand(tok)
        else:
            errors.append(f"line {lineno}: cannot parse {line!r}")
    if not errors:
        errors += validate(nl)
    if errors:
        raise NetlistError(errors)
    return nl


def _type_of(nl: Netlist, operand, types):
    if isinstance(operand, int):
        return "bool" if operand in (0, 1) else "word"
    if operand.startswith("@"):
        return "word"
    if operand in nl.inputs:
        return nl.inputs[operand]
    return types.get(operand, "word")


def validate(nl: Netlist):
    errors = []
    for b in nl.blocks.values():
        for a in b.args:
            if isinstance(a, str) and not a.startswith("@") and a not in nl.inputs and a not in nl.blocks:
                errors.append(f"line {b.line}: unresolved reference {a!r} in {b.name}")
    for name, src in nl.outputs.items():
        if isinstance(src, str) and src not in nl.inputs and src not in nl.blocks:
            errors.append(f"output {name}: unresolved reference {src!r}")
    if errors:
        return errors
    try:
        order = topo_order(nl)
    except NetlistError as e:
        return e.errors
    # two passes: DELAY1 outputs are consumed before their own type is known
    types = {}
    for final in (False, True):
        for name in order:
            b = nl.blocks[name]
            arg_types = [_type_of(nl, a, types) for a in b.args]
            if final and b.op.boolean and "word" in arg_types:
                errors.append(f"line {b.line}: {b.op.name} block {b.name} takes boolean operands only")
            if final and b.op is Op.MUX2 and arg_types[2] != "bool":
                errors.append(f"line {b.line}: MUX2 select of {b.name} must be boolean")
            if b.op.boolean or b.op is Op.CMP_GE:
                types[name] = "bool"
            elif b.op in (Op.MUX2, Op.DELAY1) and all(t == "bool" for t in arg_types[:2 if b.op is Op.MUX2 else 1]):
                types[name] = "bool"
            else:
                types[name] = "word"
    return errors


def topo_order(nl: Netlist):
    """Evaluation order; edges out of DELAY1 blocks are state, not dependencies."""
    deps = {}
    for b in nl.blocks.values():
        deps[b.name] = {
            a for a in b.args
            if isinstance(a, str) and a in nl.blocks and nl.blocks[a].op is not Op.DELAY1
        }
    order, done, visiting = [], set(), set()

    def visit(n, path):
        if n in done:
            return
        if n in visiting:
            cyc = path[path.index(n):] + [n]
            raise NetlistError([f"combinational cycle without DELAY1: {' -> '.join(cyc)}"])
        visiting.add(n)
        for d in sorted(deps[n], key=list(nl.blocks).index):
            visit(d, path + [n])
        visiting.discard(n)
        done.add(n)
        order.append(n)

    for n in nl.blocks:
        visit(n, [])
    return order


def evaluate(nl: Netlist, inputs: dict, state: dict | None = None, constants: dict | None = None,
             gains: PiGains = PiGains()):
    """One synchronous step of the netlist as plain expressions.

    DELAY1 blocks read their register and load their input at the end of the
    step.  Returns ``(outputs, block_values, next_state)``.
    """
    constants = constants or {}
    state = dict(state or {})
    vals = {}

    def value(a):
        if isinstance(a, int):
            return a
        if a.startswith("@"):
            return constants[a[1:]] & WORD_MASK
        if a in nl.inputs:
            return inputs[a] & WORD_MASK
        return vals[a]

    for name, b in nl.blocks.items():
        if b.op is Op.DELAY1:
            vals[name] = state.get(name, BlockState()).delay_reg
    for name in topo_order(nl):
        b = nl.blocks[name]
        if b.op is Op.DELAY1:
            continue
        out, st = eval_block(b.op, [value(a) for a in b.args], state.get(name, BlockState()), gains)
        vals[name] = out
        if b.op is Op.PI:
            state[name] = st
    for name, b in nl.blocks.items():
        if b.op is Op.DELAY1:
            _, state[name] = eval_block(Op.DELAY1, [value(b.args[0])], state.get(name, BlockState()))
    outs = {o: value(src) for o, src in nl.outputs.items()}
    return outs, vals, state


@dataclass
class Mapping:
    layers: int
    blocks: dict  # block name -> home CellAddr
    codes: dict  # home CellAddr -> GeneticCode
    t_memory: dict  # T CellAddr -> list of 4 codes (None for unused slots)
    inputs: dict
    outputs: dict  # port name -> Source

    def name_of(self, home: CellAddr) -> str:
        for n, a in self.blocks.items():
            if a == home:
                return n
        raise KeyError(home)

    def render(self) -> str:
        lines = [f"layers,{self.layers}"]
        for name, addr in self.blocks.items():
            lines.append(f"B,{addr},{name},{self.codes[addr]}")
        for t in sorted(self.t_memory):
            slots = ";".join("-" if c is None else str(c) for c in self.t_memory[t])
            lines.append(f"T,{t},{slots}")
        for name, src in self.outputs.items():
            lines.append(f"out,{name},{src}")
        return "\n".join(lines) + "\n"

    def build_fabric(self) -> Fabric:
        fab = Fabric(self.layers)
        for home, code in self.codes.items():
            fab.load_code(home, code)
            fab.set_mode(home, Mode.ACTIVE)
            fab.routing.add_function(home)
        for t, mem in self.t_memory.items():
            for slot, code in enumerate(mem):
                if code is not None:
                    fab.load_code(t, code, slot)
        return fab


def place(nl: Netlist, layers: int | None = None, constants: dict | None = None) -> Mapping:
    """Deterministic placement: level k -> layer k-1, declaration order, alternating L/R."""
    constants = constants or {}
    need = max(nl.levels, default=1)
    layers = need if layers is None else layers
    if layers < need:
        raise PlacementError(f"netlist uses {need} levels but only {layers} layers given")
    per_level = {}
    blocks = {}
    for b in nl.blocks.values():
        i = per_level.get(b.level, 0)
        if i >= MAX_BLOCKS_PER_LEVEL:
            raise PlacementError(f"level {b.level} holds more than {MAX_BLOCKS_PER_LEVEL} blocks")
        per_level[b.level] = i + 1
        blocks[b.name] = CellAddr("L" if i % 2 == 0 else "R", "B", i // 2, b.level - 1)

    def source(a):
        if isinstance(a, int):
            return const(a)
        if a.startswith("@"):
            if a[1:] not in constants:
                raise PlacementError(f"unbound constant {a}")
            return const(constants[a[1:]])
        if a in nl.inputs:
            return port(a)
        return cell(blocks[a])

    codes = {}
    for b in nl.blocks.values():
        codes[blocks[b.name]] = GeneticCode(b.op, tuple(source(a) for a in b.args))
    t_memory = {}
    for home, code in codes.items():
        for i in range(4):
            t = CellAddr(home.side, "T", i, home.layer)
            t_memory.setdefault(t, [None] * 4)[home.index] = code
    outputs = {o: source(src) for o, src in nl.outputs.items()}
    return Mapping(layers, blocks, codes, t_memory, dict(nl.inputs), outputs)


class Condition(enum.Enum):
    SET = "set"
    DECREMENT = "dec"
    INCREMENT = "inc"
    CANCEL = "cancel"


def ccs_semantics(condition: Condition, actual: int, target: int) -> int:
    """Reference target-speed update of the cruise controller."""
    if condition is Condition.SET:
        return actual & WORD_MASK
    if condition is Condition.DECREMENT:
        return (target - 1) & WORD_MASK
    if condition is Condition.INCREMENT:
        return (target + 1) & WORD_MASK
    return 0


__all__ = [
    "Block", "Condition", "Mapping", "Netlist", "NetlistError", "PlacementError",
    "ccs_semantics", "evaluate", "parse_netlist", "place", "topo_order", "UNUSED",
]
