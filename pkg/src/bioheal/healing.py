"""Healing layer: failure monitoring, syndrome formation/switching, stem differentiation."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .fabric import (
    CELLS_PER_SIDE,
    STEM_CELLS,
    CellAddr,
    Fabric,
    FabricError,
    Mode,
    StructuralError,
)

N_SYNDROMES = 8


class CapacityExhausted(FabricError):
    pass


class ActionKind(enum.Enum):
    DEACTIVATE = "DEACTIVATE"
    REROUTE = "REROUTE"
    RESTORE = "RESTORE"
    DIFFERENTIATE = "DIFFERENTIATE"


@dataclass(frozen=True)
class HealingAction:
    """One healing control signal.

    For RESTORE ``code_slot`` is the T-cell configuration slot; for
    DIFFERENTIATE it carries the syndrome value that selected the unit.
    """

    kind: ActionKind
    subject: CellAddr
    object: CellAddr | None = None
    code_slot: int | None = None
    timestamp_ns: int = 0

    def row(self) -> str:
        obj = "" if self.object is None else str(self.object)
        slot = "" if self.code_slot is None else str(self.code_slot)
        return f"{self.timestamp_ns},HEAL,{self.kind.value},{self.subject},{obj},{slot}"


# syndrome value -> (stem cell number, execution unit)
SYNDROME_UNITS = tuple((s // 2, s % 2) for s in range(N_SYNDROMES))


def syndrome_side(syndrome: int) -> str:
    stem, _ = SYNDROME_UNITS[syndrome]
    return "L" if stem in STEM_CELLS["L"] else "R"


def syndrome_unit(syndrome: int, layer: int = 0) -> CellAddr:
    stem, unit = SYNDROME_UNITS[syndrome]
    return CellAddr(syndrome_side(syndrome), "S", stem, layer, unit)


@dataclass(frozen=True)
class DifferentiationCommand:
    unit: CellAddr
    syndrome: int
    role_side: str

    def __post_init__(self):
        if self.unit.side != self.role_side:
            raise StructuralError(
                f"stem unit {self.unit} cannot take a role on side {self.role_side}"
            )


@dataclass
class HealingLayerState:
    layers: int
    error_latch: set = field(default_factory=set)
    dead: set = field(default_factory=set)
    free_t: dict = field(default_factory=dict)
    syndromes: dict = field(default_factory=dict)
    roles: dict = field(default_factory=dict)  # live spare -> home function
    last_syndrome: int | None = None
    action_log: list = field(default_factory=list)
    unhealed: list = field(default_factory=list)
    stale: list = field(default_factory=list)

    @classmethod
    def fresh(cls, layers: int) -> "HealingLayerState":
        st = cls(layers)
        for layer in range(layers):
            for side in ("L", "R"):
                st.free_t[layer, side] = [CellAddr(side, "T", i, layer) for i in range(CELLS_PER_SIDE)]
            st.syndromes[layer] = set(range(N_SYNDROMES))
        return st

    def home_of(self, addr: CellAddr) -> CellAddr:
        return self.roles.get(addr, addr)


def form_syndrome(state: HealingLayerState, failed: CellAddr) -> int:
    """Lowest-numbered undifferentiated stem unit on the failed cell's side."""
    avail = sorted(s for s in state.syndromes[failed.layer] if syndrome_side(s) == failed.side)
    if not avail:
        raise CapacityExhausted(f"no stem unit left for {failed}")
    state.last_syndrome = avail[0]
    return avail[0]


def switch_syndrome(available: set, selector: int, layer: int = 0, role_side: str | None = None):
    """Consume ``selector`` from ``available`` and name the unit it differentiates."""
    if selector not in available:
        raise StructuralError(f"syndrome {selector} not available")
    unit = syndrome_unit(selector, layer)
    cmd = DifferentiationCommand(unit, selector, role_side or unit.side)
    available.discard(selector)
    return cmd


def monitor_failures(state: HealingLayerState, flags, now_ns: int = 0):
    """Turn newly raised permanent-error flags into healing actions.

    ``flags`` is an iterable of addresses whose DWC flag is up this half-tick.
    B cells are healed by the lowest free same-side T cell; T-role holders,
    and B cells once the side's T cells are used up, escalate to a stem unit.
    """
    actions = []
    for addr in sorted(set(flags)):
        if addr in state.dead:
            state.stale.append((now_ns, addr))
            continue
        if addr in state.error_latch:
            continue
        state.error_latch.add(addr)
        state.dead.add(addr)
        home = state.home_of(addr)
        deact = HealingAction(ActionKind.DEACTIVATE, addr, timestamp_ns=now_ns)
        free = state.free_t[addr.layer, addr.side]
        if addr.kind == "B" and free:
            spare = free.pop(0)
            tail = HealingAction(ActionKind.RESTORE, spare, code_slot=home.index, timestamp_ns=now_ns)
        else:
            try:
                syn = form_syndrome(state, addr)
            except CapacityExhausted:
                state.unhealed.append((now_ns, addr))
                state.action_log.append(deact)
                actions.append(deact)
                continue
            cmd = switch_syndrome(state.syndromes[addr.layer], syn, addr.layer, addr.side)
            spare = cmd.unit
            tail = HealingAction(ActionKind.DIFFERENTIATE, spare, addr, syn, now_ns)
        state.roles.pop(addr, None)
        state.roles[spare] = home
        triple = [deact, HealingAction(ActionKind.REROUTE, addr, spare, timestamp_ns=now_ns), tail]
        state.action_log.extend(triple)
        actions.extend(triple)
    return actions


def differentiate_stem(fabric: Fabric, cmd: DifferentiationCommand, home: CellAddr):
    """Stem unit takes over the role of function ``home``: load its code, go HEALING."""
    c = fabric[cmd.unit]
    if c.mode is not Mode.PASSIVE:
        raise StructuralError(f"stem unit {cmd.unit} already differentiated")
    fabric.load_code(cmd.unit, fabric.read_code(home))
    fabric.set_mode(cmd.unit, Mode.HEALING)


def apply_action(fabric: Fabric, action: HealingAction):
    """Apply one action to the fabric; returns the cell that must start firing, if any."""
    k = action.kind
    if k is ActionKind.DEACTIVATE:
        fabric.set_mode(action.subject, Mode.DEAD)
        return None
    if k is ActionKind.REROUTE:
        fabric.reroute(action.subject, action.object)
        return None
    home = fabric.routing.home_of(action.subject)
    if home is None:
        raise StructuralError(f"{action.subject} is not routed to any function")
    if k is ActionKind.RESTORE:
        c = fabric[action.subject]
        mem = c.config_memory
        if action.code_slot >= len(mem) or mem[action.code_slot] is None:
            raise StructuralError(f"T cell {action.subject} has no genetic codes")
        c.active_slot = action.code_slot
        fabric.set_mode(action.subject, Mode.HEALING)
    else:
        cmd = DifferentiationCommand(action.subject, action.code_slot, action.object.side)
        differentiate_stem(fabric, cmd, home)
    return action.subject


def apply_unhealed(fabric: Fabric, addr: CellAddr):
    """Capacity exhausted: the lost function's consumers read the disabled value."""
    fabric.routing.disable(addr)
