"""Critical functions layer: cells, hybrid redundancy units, DWC and routing."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from . import kernels
from .blocks import WORD_MASK, BlockState, Op, PiGains, eval_block

HALF_TICK_NS = 5
CELL_LATENCY_HALF_TICKS = 7  # 3.5 clock cycles
CELLS_PER_SIDE = 4
HRUS_PER_CELL = 4
HRU_NAMES = ("N", "W", "E", "S")
STEM_CELLS = {"L": (0, 2), "R": (1, 3)}


class FabricError(Exception):
    pass


class ConfigurationError(FabricError):
    pass


class StructuralError(FabricError):
    """Simulator invariant broken; never a modelled fault condition."""


class SpareExhausted(FabricError):
    pass


class Mode(enum.Enum):
    IDLE = "IDLE"  # unmapped B cell
    ACTIVE = "ACTIVE"
    PASSIVE = "PASSIVE"  # spare T cell or undifferentiated stem unit
    HEALING = "HEALING"
    DEAD = "DEAD"


LEGAL_TRANSITIONS = {
    (Mode.IDLE, Mode.ACTIVE),
    (Mode.ACTIVE, Mode.DEAD),
    (Mode.PASSIVE, Mode.HEALING),
    (Mode.HEALING, Mode.DEAD),
}

_KIND_RANK = {"B": 0, "T": 1, "S": 2}
_ADDR_RE = re.compile(r"^([LR])\.([BTS])(\d)(?:\.u([01]))?(?:@(\d+))?$")


@dataclass(frozen=True, eq=False)
class CellAddr:
    """Physical cell address.

    ``kind`` is ``B`` (active), ``T`` (passive spare) or ``S`` (stem execution
    unit).  Stem cells are numbered S0..S3 with S0/S2 on the left and S1/S3
    on the right; ``unit`` picks one of the two execution units inside.
    """

    side: str
    kind: str
    index: int
    layer: int = 0
    unit: int = 0

    def __post_init__(self):
        if self.side not in ("L", "R") or self.kind not in _KIND_RANK:
            raise ConfigurationError(f"bad cell address {self!r}")
        if self.kind == "S":
            if self.index not in STEM_CELLS[self.side] or self.unit not in (0, 1):
                raise ConfigurationError(f"no stem unit {self.side}.S{self.index}.u{self.unit}")
        elif not 0 <= self.index < CELLS_PER_SIDE or self.unit:
            raise ConfigurationError(f"no cell {self.side}.{self.kind}{self.index}")
        if self.layer < 0:
            raise ConfigurationError("negative layer")
        # addresses key every hot dictionary; hash once
        object.__setattr__(self, "_key", (self.side, self.kind, self.index, self.layer, self.unit))
        object.__setattr__(self, "_hash", hash(self._key))

    def __hash__(self):
        return self._hash

    def __reduce__(self):
        # string hashes differ between processes; rebuild rather than copy _hash
        return (CellAddr, (self.side, self.kind, self.index, self.layer, self.unit))

    def __eq__(self, other):
        return isinstance(other, CellAddr) and self._key == other._key

    def key(self):
        return (self.layer, _KIND_RANK[self.kind], self.side, self.index, self.unit)

    def __lt__(self, other):
        return self.key() < other.key()

    def __str__(self):
        s = f"{self.side}.{self.kind}{self.index}"
        if self.kind == "S":
            s += f".u{self.unit}"
        if self.layer:
            s += f"@{self.layer}"
        return s

    @classmethod
    def parse(cls, text: str) -> "CellAddr":
        m = _ADDR_RE.match(text.strip())
        if not m:
            raise ConfigurationError(f"malformed cell address {text!r}")
        side, kind, idx, unit, layer = m.groups()
        if kind == "S" and unit is None:
            raise ConfigurationError(f"stem address needs a unit: {text!r}")
        if kind != "S" and unit is not None:
            raise ConfigurationError(f"only stem cells have units: {text!r}")
        return cls(side, kind, int(idx), int(layer or 0), int(unit or 0))


def layer_addresses(layer: int):
    """All 8 B, 8 T and 8 stem-unit addresses of one layer, in address order."""
    out = []
    for kind in ("B", "T"):
        for side in ("L", "R"):
            out += [CellAddr(side, kind, i, layer) for i in range(CELLS_PER_SIDE)]
    for side in ("L", "R"):
        for s in STEM_CELLS[side]:
            out += [CellAddr(side, "S", s, layer, u) for u in (0, 1)]
    return sorted(out)


@dataclass(frozen=True)
class Source:
    """One input selector of a genetic code."""

    kind: str  # port | cell | const | unused
    ref: object = None

    def __str__(self):
        if self.kind == "unused":
            return "-"
        if self.kind == "const":
            return f"#{self.ref}"
        if self.kind == "port":
            return f"${self.ref}"
        return str(self.ref)


UNUSED = Source("unused")


def port(name):
    return Source("port", name)


def const(value):
    return Source("const", int(value) & WORD_MASK)


def cell(home):
    return Source("cell", home)


@dataclass(frozen=True)
class GeneticCode:
    op: Op
    inputs: tuple = (UNUSED,) * 4
    output_enable: bool = True

    def __post_init__(self):
        ins = tuple(self.inputs) + (UNUSED,) * (4 - len(self.inputs))
        if len(ins) != 4:
            raise ConfigurationError("a genetic code has exactly 4 input selectors")
        arity = Op(self.op).arity
        # selectors past the arity are don't-care
        object.__setattr__(self, "op", Op(self.op))
        object.__setattr__(self, "inputs", ins[:arity] + (UNUSED,) * (4 - arity))

    def __str__(self):
        return f"{self.op.name}({' '.join(str(s) for s in self.inputs[: self.op.arity])})"


@dataclass
class HruState:
    replicas: list = field(default_factory=lambda: [0, 0, 0])
    detector_flags: list = field(default_factory=lambda: [False, False, False])
    active_replica: int = 0
    comparator_out: int = 0


def hru_step(hru: HruState, incoming: int, upsets=()):
    """Load ``incoming`` into the three registers and vote.

    ``upsets`` is a sequence of ``(replica, xor_mask)`` corruptions landing
    on this half-tick.  Returns ``(output, transient_flag, unmaskable)``.
    When no two replicas agree the active replica is passed through and
    ``unmaskable`` is set.
    """
    reps = [incoming, incoming, incoming]
    for replica, mask in upsets:
        reps[replica] = (reps[replica] ^ mask) & WORD_MASK
    hru.replicas = reps
    value, flags = kernels.vote3(reps[0], reps[1], reps[2])
    if flags == 7:
        hru.detector_flags = [True, True, True]
        hru.comparator_out = reps[hru.active_replica]
        return hru.comparator_out, True, True
    if not flags:
        hru.detector_flags = [False, False, False]
        hru.comparator_out = value
        return value, False, False
    hru.detector_flags = [bool(flags & (1 << i)) for i in range(3)]
    if hru.detector_flags[hru.active_replica]:
        hru.active_replica = hru.detector_flags.index(False)
    hru.comparator_out = value
    return value, bool(flags), False


@dataclass
class StuckMask:
    and_mask: int = WORD_MASK
    or_mask: int = 0

    def add(self, mask: int, value: int):
        if value:
            self.or_mask |= mask
        else:
            self.and_mask &= ~mask & WORD_MASK

    @property
    def clean(self):
        return self.and_mask == WORD_MASK and self.or_mask == 0


@dataclass
class FunctionCell:
    addr: CellAddr
    mode: Mode
    config_memory: list = field(default_factory=list)
    active_slot: int = 0
    hrus: list = field(default_factory=lambda: [HruState() for _ in range(HRUS_PER_CELL)])
    gfb_state: list = field(default_factory=lambda: [BlockState(), BlockState()])
    stuck: list = field(default_factory=lambda: [StuckMask(), StuckMask()])
    dwc_mismatch_count: int = 0
    # firing bookkeeping, driven by the simulator
    next_start: int | None = None
    pending: tuple | None = None  # (done_tick, out_primary, out_shadow, inputs_valid)

    @property
    def code(self) -> GeneticCode | None:
        if not self.config_memory:
            return None
        return self.config_memory[self.active_slot]

    @property
    def firing(self) -> bool:
        return self.mode in (Mode.ACTIVE, Mode.HEALING)


def begin_firing(c: FunctionCell, inputs, gains: PiGains):
    """Evaluate the active code on both GFB copies; results are held until done."""
    if not c.firing:
        raise StructuralError(f"cannot fire {c.addr} in mode {c.mode.value}")
    code = c.code
    op = code.op
    args = inputs[: op.arity]
    if op.combinational:
        a, b, s = (list(args) + [0, 0])[:3]
        v = kernels.comb_eval(int(op), a, b, s)
        return v, v
    out0, c.gfb_state[0] = eval_block(op, args, c.gfb_state[0], gains)
    out1, c.gfb_state[1] = eval_block(op, args, c.gfb_state[1], gains)
    return out0, out1


def complete_firing(c: FunctionCell, raw0: int, raw1: int, threshold: int):
    """Apply permanent faults, compare the two copies.

    Returns ``(output, mismatch, permanent_error_flag)``; ``output`` is the
    primary copy's value.
    """
    s0, s1 = c.stuck
    out0 = kernels.apply_stuck(raw0, s0.and_mask, s0.or_mask)
    out1 = kernels.apply_stuck(raw1, s1.and_mask, s1.or_mask)
    if out0 != out1:
        c.dwc_mismatch_count += 1
    else:
        c.dwc_mismatch_count = 0
    return out0, out0 != out1, c.dwc_mismatch_count >= threshold


def cell_fire(c: FunctionCell, inputs, gains: PiGains = PiGains(), threshold: int = 2):
    """One complete firing outside the simulator.

    Returns ``(output, done_after_half_ticks, permanent_error_flag)``.
    ``inputs`` are the four words after HRU filtering.
    """
    raw0, raw1 = begin_firing(c, inputs, gains)
    out, _, flag = complete_firing(c, raw0, raw1, threshold)
    return out, CELL_LATENCY_HALF_TICKS, flag


@dataclass
class RoutingState:
    """Per logical function: which physical cell currently drives it.

    Functions are identified by their home B-cell address.  The last value
    committed by the live producer is latched here so that consumers keep
    reading a stable word while a spare is being brought up.  ``None`` as
    producer means the function has been lost (disabled value 0).
    """

    live: dict = field(default_factory=dict)
    value: dict = field(default_factory=dict)
    valid: dict = field(default_factory=dict)
    driver_of: dict = field(default_factory=dict)  # producer -> home, inverse of ``live``

    def add_function(self, home: CellAddr):
        self.live[home] = home
        self.driver_of[home] = home
        self.value[home] = 0
        self.valid[home] = False

    def in_use(self, addr: CellAddr) -> bool:
        return addr in self.driver_of

    def home_of(self, addr: CellAddr):
        return self.driver_of.get(addr)

    def reroute(self, dead: CellAddr, substitute: CellAddr):
        if self.in_use(substitute):
            raise SpareExhausted(f"{substitute} already drives a function")
        home = self.driver_of.pop(dead, None)
        if home is not None:
            self.live[home] = substitute
            self.driver_of[substitute] = home

    def disable(self, dead: CellAddr):
        home = self.driver_of.pop(dead, None)
        if home is not None:
            self.live[home] = None
            self.value[home] = 0
            self.valid[home] = False

    def producers(self):
        return {p for p in self.live.values() if p is not None}


class Fabric:
    """All cells of ``layers`` critical functions layers plus routing."""

    def __init__(self, layers: int):
        if layers < 1:
            raise ConfigurationError("a fabric needs at least one layer")
        self.layers = layers
        self.cells: dict[CellAddr, FunctionCell] = {}
        for layer in range(layers):
            for a in layer_addresses(layer):
                mode = {"B": Mode.IDLE, "T": Mode.PASSIVE, "S": Mode.PASSIVE}[a.kind]
                self.cells[a] = FunctionCell(a, mode)
        self.routing = RoutingState()

    def __getitem__(self, addr: CellAddr) -> FunctionCell:
        try:
            return self.cells[addr]
        except KeyError:
            raise ConfigurationError(f"no cell at {addr}") from None

    def load_code(self, addr: CellAddr, code: GeneticCode, slot: int = 0):
        c = self[addr]
        if addr.kind == "T":
            if not 0 <= slot < CELLS_PER_SIDE:
                raise ConfigurationError(f"T cell slot {slot} out of range at {addr}")
            while len(c.config_memory) < CELLS_PER_SIDE:
                c.config_memory.append(None)
        elif slot != 0:
            raise ConfigurationError(f"{addr} holds a single genetic code")
        elif not c.config_memory:
            c.config_memory.append(None)
        c.config_memory[slot] = code

    def read_code(self, addr: CellAddr, slot: int = 0):
        mem = self[addr].config_memory
        return mem[slot] if slot < len(mem) else None

    def set_mode(self, addr: CellAddr, mode: Mode):
        c = self[addr]
        if (c.mode, mode) not in LEGAL_TRANSITIONS:
            raise StructuralError(f"illegal mode transition {c.mode.value}->{mode.value} at {addr}")
        c.mode = mode
        if mode is Mode.DEAD:
            c.next_start = None
            c.pending = None

    def reroute(self, dead: CellAddr, substitute: CellAddr):
        if self[dead].mode is not Mode.DEAD:
            raise StructuralError(f"reroute from live cell {dead}")
        if self[substitute].mode is not Mode.PASSIVE or self.routing.in_use(substitute):
            raise SpareExhausted(f"{substitute} is not a free spare")
        if dead.side != substitute.side or dead.layer != substitute.layer:
            raise StructuralError(f"cross-side reroute {dead} -> {substitute}")
        self.routing.reroute(dead, substitute)

    def check_routing(self):
        """Totality: every live function has one non-dead producer."""
        seen = set()
        for home, p in self.routing.live.items():
            if p is None:
                continue
            if self[p].mode is Mode.DEAD:
                raise StructuralError(f"function {home} routed to dead cell {p}")
            if p in seen:
                raise StructuralError(f"{p} drives two functions")
            seen.add(p)

    def dump(self) -> str:
        """Line-oriented snapshot: addr, mode, active code, mismatch counter."""
        lines = []
        for a in sorted(self.cells):
            c = self.cells[a]
            code = c.code
            lines.append(f"{a},{c.mode.value},{code if code else '-'},{c.dwc_mismatch_count}")
        return "\n".join(lines) + "\n"
