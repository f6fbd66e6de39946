"""Fault models, schedule files and injection.

Schedule lines are ``time_ns,kind,target,payload``::

    180,transient,L.B0.hru1.rep2,flip:0x0004
    230,permanent,L.B0.gfb0,stuck0:0x0001
    400,ccf,L.B0.gfb0+L.B0.gfb1,stuck1:0x0100
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .fabric import HALF_TICK_NS, CellAddr, ConfigurationError, Mode

# The healing layer is assumed fault-free and cannot be targeted.
HEALING_TARGETS = ("H.", "FMU", "FHS", "SSC", "HEAL", "MON", "SYN")

_TARGET_RE = re.compile(r"^(?P<cell>[^.]+\.[^.]+(?:\.u\d)?(?:@\d+)?)\.(?:hru(?P<hru>\d)\.rep(?P<rep>\d)|gfb(?P<gfb>\d))$")
_PAYLOAD_RE = re.compile(r"^(flip|stuck0|stuck1):(0x[0-9A-Fa-f]+|\d+)$")


class ScheduleError(ValueError):
    pass


class FaultKind(enum.Enum):
    TRANSIENT_REG = "transient"
    PERMANENT_GFB = "permanent"
    CCF = "ccf"


@dataclass(frozen=True)
class FaultTarget:
    addr: CellAddr
    hru: int | None = None
    replica: int | None = None
    gfb: int | None = None

    def __str__(self):
        if self.gfb is not None:
            return f"{self.addr}.gfb{self.gfb}"
        return f"{self.addr}.hru{self.hru}.rep{self.replica}"


@dataclass(frozen=True)
class Fault:
    id: str
    time_ns: int
    kind: FaultKind
    targets: tuple
    action: str  # flip | stuck0 | stuck1
    mask: int

    @property
    def payload(self):
        return f"{self.action}:0x{self.mask:04X}"

    def line(self):
        tgt = "+".join(str(t) for t in self.targets)
        return f"{self.time_ns},{self.kind.value},{tgt},{self.payload}"


def parse_target(text: str) -> FaultTarget:
    text = text.strip()
    if text.upper().startswith(HEALING_TARGETS):
        raise ScheduleError(f"healing-layer component {text!r} cannot be a fault target")
    m = _TARGET_RE.match(text)
    if not m:
        raise ScheduleError(f"malformed target {text!r}")
    try:
        addr = CellAddr.parse(m.group("cell"))
    except ConfigurationError as e:
        raise ScheduleError(f"unknown address {m.group('cell')!r}: {e}") from None
    if m.group("gfb") is not None:
        gfb = int(m.group("gfb"))
        if gfb > 1:
            raise ScheduleError(f"no GFB copy {gfb} (copies are gfb0, gfb1)")
        return FaultTarget(addr, gfb=gfb)
    hru, rep = int(m.group("hru")), int(m.group("rep"))
    if hru > 3 or rep > 2:
        raise ScheduleError(f"no replica {text!r}")
    return FaultTarget(addr, hru=hru, replica=rep)


def _parse_line(lineno, line):
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != 4:
        raise ScheduleError(f"line {lineno}: expected time_ns,kind,target,payload")
    t_txt, kind_txt, tgt_txt, payload = parts
    try:
        t = int(t_txt)
    except ValueError:
        raise ScheduleError(f"line {lineno}: bad time {t_txt!r}") from None
    if t < 0 or t % HALF_TICK_NS:
        raise ScheduleError(f"line {lineno}: time not multiple of {HALF_TICK_NS}")
    try:
        kind = FaultKind(kind_txt)
    except ValueError:
        raise ScheduleError(f"line {lineno}: malformed kind {kind_txt!r}") from None
    try:
        targets = tuple(parse_target(x) for x in tgt_txt.split("+"))
    except ScheduleError as e:
        raise ScheduleError(f"line {lineno}: {e}") from None
    m = _PAYLOAD_RE.match(payload)
    if not m:
        raise ScheduleError(f"line {lineno}: malformed payload {payload!r}")
    action, mask = m.group(1), int(m.group(2), 0)
    if not 0 < mask <= 0xFFFF:
        raise ScheduleError(f"line {lineno}: mask must be a nonzero 16-bit word")
    if kind is FaultKind.TRANSIENT_REG:
        if len(targets) != 1 or targets[0].hru is None or action != "flip":
            raise ScheduleError(f"line {lineno}: transient needs one replica target and a flip payload")
    else:
        if any(x.gfb is None for x in targets) or action == "flip":
            raise ScheduleError(f"line {lineno}: {kind.value} needs GFB targets and a stuck payload")
        if kind is FaultKind.PERMANENT_GFB and len(targets) != 1:
            raise ScheduleError(f"line {lineno}: permanent names exactly one GFB copy")
        if kind is FaultKind.CCF and len(targets) < 2:
            raise ScheduleError(f"line {lineno}: ccf needs at least two targets")
    return t, kind, targets, action, mask


def parse_schedule(text: str):
    """Parse a schedule file into a time-sorted tuple of faults with ids f0, f1, ..."""
    raw = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            raw.append(_parse_line(lineno, line))
    raw.sort(key=lambda r: r[0])
    return tuple(Fault(f"f{i}", *r) for i, r in enumerate(raw))


def format_schedule(schedule) -> str:
    return "".join(f.line() + "\n" for f in schedule)


def check_layers(schedule, layers: int):
    for f in schedule:
        for x in f.targets:
            if x.addr.layer >= layers:
                raise ScheduleError(f"{f.id}: unknown address {x.addr} (fabric has {layers} layers)")


def inject(sim, fault: Fault):
    """Apply ``fault`` to a running simulation at its current half-tick."""
    if fault.time_ns != sim.time_ns:
        raise ValueError(f"{fault.id} due at {fault.time_ns} ns, simulation at {sim.time_ns} ns")
    sim.record("FAULT", fault.id, f"{fault.kind.value}:{'+'.join(map(str, fault.targets))}:{fault.payload}")
    for x in fault.targets:
        cell = sim.fabric[x.addr]
        if cell.mode is Mode.DEAD:
            sim.record("EVENT", "fault_no_effect", f"{fault.id}:{x}")
            continue
        if fault.kind is FaultKind.TRANSIENT_REG:
            sim.upsets.setdefault((x.addr, x.hru), []).append((x.replica, fault.mask, fault.id))
        else:
            cell.stuck[x.gfb].add(fault.mask, 1 if fault.action == "stuck1" else 0)
    return sim


def random_transient(rng, mapping, until_ns: int, layers_hrus=4) -> str:
    """One schedule line upsetting one replica of one mapped cell at a random half-tick."""
    homes = sorted(mapping.codes)
    addr = homes[rng.randrange(len(homes))]
    t = rng.randrange(until_ns // HALF_TICK_NS) * HALF_TICK_NS
    mask = 1 << rng.randrange(16)
    return (f"{t},transient,{addr}.hru{rng.randrange(layers_hrus)}"
            f".rep{rng.randrange(3)},flip:0x{mask:04X}\n")
