"""Half-tick lockstep engine for the two-layer fabric.

Every half-tick runs the same fixed phase order:

1. stimulus edges        5. DWC flags
2. fault injection       6. failure monitor
3. HRU vote              7. healing actions
4. GFB completions/starts 8. output latch, trace rows

Cells fire free-running: a firing samples its HRU outputs at its start
half-tick and completes 7 half-ticks (3.5 clock cycles) later; the next
firing starts ``period_half_ticks`` after the previous start.  A completion
at half-tick t is visible to starts from t+1 on.  A firing whose two GFB
copies disagree does not update the routed value, so consumers keep the
last agreed word while the healing layer reacts.
"""
from __future__ import annotations

import bisect

import hashlib
import io
from dataclasses import dataclass, field

from . import faults as _faults
from .blocks import BlockState, Op, PiGains
from .fabric import (
    CELL_LATENCY_HALF_TICKS,
    HALF_TICK_NS,
    HRU_NAMES,
    HRUS_PER_CELL,
    Mode,
    begin_firing,
    complete_firing,
    hru_step,
)
from .healing import HealingLayerState, apply_action, apply_unhealed, monitor_failures
from .netlist import Mapping

KIND_RANK = {"SIGNAL": 0, "FAULT": 1, "HEAL": 2, "EVENT": 3}
TRACE_HEADER = "time_ns,kind,name,value"


class StimulusError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    period_half_ticks: int = 8
    heal_settle_half_ticks: int = 7
    dwc_threshold: int = 2
    layer_phase_half_ticks: tuple = ()
    gains: PiGains = PiGains()

    def __post_init__(self):
        if self.period_half_ticks < CELL_LATENCY_HALF_TICKS:
            raise ValueError("firing period shorter than the cell latency")
        if self.dwc_threshold < 1:
            raise ValueError("DWC threshold must be >= 1")

    def phase(self, layer: int) -> int:
        p = self.layer_phase_half_ticks
        return p[layer] if layer < len(p) else 0


@dataclass
class Stimulus:
    """Piecewise-constant input waveforms: port -> [(time_ns, word), ...]."""

    series: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, pts in self.series.items():
            if not pts or pts[0][0] != 0:
                raise StimulusError(f"port {name}: first sample must be at t=0")
            for (t0, _), (t1, _) in zip(pts, pts[1:]):
                if t1 <= t0:
                    raise StimulusError(f"port {name}: times not strictly increasing at {t1}")
            for t, _ in pts:
                if t % HALF_TICK_NS:
                    raise StimulusError(f"port {name}: time {t} not a multiple of {HALF_TICK_NS}")

    def edges(self):
        """half-tick -> [(port, value)]"""
        out = {}
        for name in sorted(self.series):
            for t, v in self.series[name]:
                out.setdefault(t // HALF_TICK_NS, []).append((name, v & 0xFFFF))
        return out

    def to_text(self):
        lines = [f"{t},{name},{v}" for name in sorted(self.series) for t, v in self.series[name]]
        return "\n".join(lines) + ("\n" if lines else "")


def parse_stimulus(text: str) -> Stimulus:
    series = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise StimulusError(f"line {lineno}: expected time_ns,port,value")
        try:
            t, v = int(parts[0]), int(parts[2], 0)
        except ValueError:
            raise StimulusError(f"line {lineno}: bad number") from None
        if t % HALF_TICK_NS:
            raise StimulusError(f"line {lineno}: time {t} not multiple of {HALF_TICK_NS}")
        series.setdefault(parts[1], []).append((t, v))
    for pts in series.values():
        pts.sort(key=lambda p: p[0])
    return Stimulus(series)


@dataclass
class Trace:
    rows: list = field(default_factory=list)  # (time_ns, kind, name, value)
    meta: dict = field(default_factory=dict)
    until_ns: int = 0

    def signals(self):
        return [r for r in self.rows if r[1] == "SIGNAL"]

    def of_kind(self, kind):
        return [r for r in self.rows if r[1] == kind]

    def signal_names(self):
        return sorted({r[2] for r in self.rows if r[1] == "SIGNAL"})

    def waveform(self, name):
        """[(time_ns, int value)] change points of one signal."""
        return [(r[0], int(r[3])) for r in self.rows if r[1] == "SIGNAL" and r[2] == name]

    def value_at(self, name, t_ns):
        v = None
        for t, val in self.waveform(name):
            if t > t_ns:
                break
            v = val
        return v

    def first_time(self, name, pred):
        for t, v in self.waveform(name):
            if pred(v):
                return t
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.meta):
            buf.write(f"# {k}={self.meta[k]}\n")
        buf.write(f"# until_ns={self.until_ns}\n")
        buf.write(TRACE_HEADER + "\n")
        for t, kind, name, value in self.rows:
            buf.write(f"{t},{kind},{name},{value}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        tr = cls()
        header_seen = False
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                if k == "until_ns":
                    tr.until_ns = int(v)
                else:
                    tr.meta[k] = v
                continue
            if not header_seen:
                if line.strip() != TRACE_HEADER:
                    raise ValueError(f"line {lineno}: missing trace header")
                header_seen = True
                continue
            parts = line.split(",", 3)
            if len(parts) != 4 or parts[1] not in KIND_RANK:
                raise ValueError(f"line {lineno}: malformed trace row")
            tr.rows.append((int(parts[0]), parts[1], parts[2], parts[3]))
        if tr.until_ns == 0 and tr.rows:
            tr.until_ns = max(r[0] for r in tr.rows)
        return tr


def sort_rows(rows):
    # HEAL rows keep emission order within a tick (stable sort)
    rows.sort(key=lambda r: (r[0], KIND_RANK[r[1]], r[2] if r[1] != "HEAL" else ""))
    return rows


def config_digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(str(p).encode())
        h.update(b"\x00")
    return h.hexdigest()[:16]


def _inputs_valid(op, words, oks):
    # a multiplexer only needs its select line and the selected data input
    if op is Op.MUX2:
        return oks[2] and (oks[1] if words[2] else oks[0])
    return all(oks[: op.arity])


class Simulation:
    """One deterministic run of a mapped netlist under a stimulus and fault schedule."""

    def __init__(self, mapping: Mapping, stimulus: Stimulus | None = None, schedule=None,
                 config: SimConfig = SimConfig(), probes=(), meta=None):
        self.mapping = mapping
        self.config = config
        self.fabric = mapping.build_fabric()
        self.healing = HealingLayerState.fresh(mapping.layers)
        self.stim_edges = (stimulus or Stimulus()).edges()
        self.stim_ticks = sorted(self.stim_edges)
        self.schedule = list(schedule or [])
        self._fault_i = 0
        self.tick = 0
        self.rows = []
        self.meta = dict(meta or {})
        self.ports = {name: 0 for name in mapping.inputs}
        self.upsets = {}  # (addr, hru) -> [(replica, mask, fault id)] for this half-tick
        self.hru_out = {}
        self._last = {}
        self._pulses = {}  # half-tick -> [signal names to drop to 0]
        self.awaiting_first_done = set()
        self.heal_complete = []  # (time_ns, addr)
        self.probes = {}
        for name in probes:
            if name not in mapping.blocks:
                raise KeyError(f"probe {name!r} is not a block")
            self.probes[mapping.blocks[name]] = name
        for addr, c in self.fabric.cells.items():
            if c.mode is Mode.ACTIVE:
                c.next_start = config.phase(addr.layer)
        self._refresh_firing()

    # -- helpers -----------------------------------------------------------
    @property
    def time_ns(self):
        return self.tick * HALF_TICK_NS

    def _refresh_firing(self):
        self.firing = [c for _, c in sorted(self.fabric.cells.items()) if c.firing]

    def current(self, name):
        """Latest value written to signal ``name`` (None before its first row)."""
        return self._last.get(name)

    def record(self, kind, name, value):
        self.rows.append((self.time_ns, kind, name, str(value)))

    def _signal(self, name, value):
        if self._last.get(name) != value:
            self._last[name] = value
            self.record("SIGNAL", name, value)

    def _pulse(self, name):
        self._signal(name, 1)
        self._pulses.setdefault(self.tick + 1, []).append(name)

    def _source(self, src):
        kind = src.kind
        if kind == "cell":
            r = self.fabric.routing
            return r.value[src.ref], r.valid[src.ref]
        if kind == "port":
            return self.ports.get(src.ref, 0), True
        if kind == "const":
            return src.ref, True
        return 0, True

    def _home(self, addr):
        return self.fabric.routing.home_of(addr)

    # -- stepping ----------------------------------------------------------
    def step(self):
        t = self.tick
        fab = self.fabric
        cfg = self.config
        # 1. stimulus
        for name, v in self.stim_edges.get(t, ()):
            if name in self.ports:
                self.ports[name] = v
                self._signal(name, v)
        if t == 0:
            for name in self.mapping.inputs:
                self._signal(name, self.ports[name])
        for name in self._pulses.pop(t, ()):
            self._signal(name, 0)
        # 2. faults
        self.upsets = {}
        sched = self.schedule
        while self._fault_i < len(sched) and sched[self._fault_i].time_ns <= self.time_ns:
            f = sched[self._fault_i]
            self._fault_i += 1
            if f.time_ns == self.time_ns:
                _faults.inject(self, f)
        # 3. HRU stage
        starting = [c for c in self.firing if c.next_start == t]
        hru_cells = {c.addr: c for c in starting}
        for (addr, _h) in self.upsets:
            c = fab.cells[addr]
            if c.firing:
                hru_cells.setdefault(addr, c)
        for addr, c in hru_cells.items():
            code = c.code
            outs = []
            oks = []
            for h in range(HRUS_PER_CELL):
                incoming, ok = self._source(code.inputs[h])
                oks.append(ok)
                ups = self.upsets.get((addr, h))
                if ups:
                    out, flag, unmask = hru_step(c.hrus[h], incoming, [(r, m) for r, m, _ in ups])
                    fid = ",".join(u[2] for u in ups)
                    tag = f"{fid}:{addr}.hru{h}"
                    self.record("EVENT", "unmaskable_transient" if unmask else "transient_masked", tag)
                else:
                    out, flag, unmask = hru_step(c.hrus[h], incoming)
                outs.append(out)
            self.hru_out[addr] = (outs, _inputs_valid(code.op, outs, oks))
        for (addr, h), ups in self.upsets.items():
            if not fab.cells[addr].firing:
                for _, _, fid in ups:
                    self.record("EVENT", "fault_no_effect", f"{fid}:{addr}.hru{h}")
        # 4. GFB completions, then starts
        flagged = []
        routing = fab.routing
        for c in self.firing:
            p = c.pending
            if p is None or p[0] != t:
                continue
            c.pending = None
            _, raw0, raw1, out_valid = p
            out, mismatch, flag = complete_firing(c, raw0, raw1, cfg.dwc_threshold)
            home = self._home(c.addr)
            if home is not None and not mismatch:
                routing.value[home] = out
                routing.valid[home] = routing.valid[home] or out_valid
            if c.addr in self.awaiting_first_done:
                self.awaiting_first_done.discard(c.addr)
                self.heal_complete.append((self.time_ns, c.addr))
                self.record("EVENT", "heal_complete", str(c.addr))
            if home in self.probes:
                self._pulse(f"{self.probes[home]}.done")
            if flag:
                flagged.append(c.addr)
        for c in starting:
            outs, valid = self.hru_out[c.addr]
            raw0, raw1 = begin_firing(c, outs, cfg.gains)
            # a register has a defined reset word, so it is valid from its first firing
            out_valid = valid or c.code.op is Op.DELAY1
            c.pending = (t + CELL_LATENCY_HALF_TICKS, raw0, raw1, out_valid)
            c.next_start = t + cfg.period_half_ticks
            home = self._home(c.addr)
            if home in self.probes:
                for hn in HRU_NAMES:
                    self._pulse(f"{self.probes[home]}.{hn}")
        # 5-7. monitor and heal
        if flagged:
            self._heal(flagged)
        # 8. output latch
        for name, src in self.mapping.outputs.items():
            v, ok = self._source(src)
            self._signal(name, v)
            self._signal(f"{name}.valid", int(ok))
        for home, name in self.probes.items():
            self._signal(f"{name}.dout", routing.value[home])
        self.tick += 1

    def _heal(self, flagged):
        st = self.healing
        n_unhealed = len(st.unhealed)
        n_stale = len(st.stale)
        actions = monitor_failures(st, flagged, self.time_ns)
        changed = False
        for a in actions:
            self.rows.append((a.timestamp_ns, "HEAL", a.kind.value, a.row().split(",", 3)[3]))
            spare = apply_action(self.fabric, a)
            changed = True
            if spare is not None:
                c = self.fabric.cells[spare]
                c.next_start = self.tick + self.config.heal_settle_half_ticks
                c.gfb_state = [BlockState(), BlockState()]
                self.awaiting_first_done.add(spare)
        for _, addr in st.unhealed[n_unhealed:]:
            apply_unhealed(self.fabric, addr)
            self.record("EVENT", "unhealed", str(addr))
        for _, addr in st.stale[n_stale:]:
            self.record("EVENT", "stale_flag", str(addr))
        if changed:
            self._refresh_firing()

    def _next_event_tick(self, limit):
        cands = [limit]
        if self._pulses:
            cands.append(min(self._pulses))
        for c in self.firing:
            if c.next_start is not None:
                cands.append(c.next_start)
            if c.pending is not None:
                cands.append(c.pending[0])
        i = self._fault_i
        if i < len(self.schedule):
            cands.append(self.schedule[i].time_ns // HALF_TICK_NS)
        j = bisect.bisect_left(self.stim_ticks, self.tick)
        if j < len(self.stim_ticks):
            cands.append(self.stim_ticks[j])
        return max(self.tick, min(cands))

    def run_until(self, until_ns: int):
        """Advance through half-tick ``until_ns/5`` inclusive.

        Half-ticks with nothing due are skipped: they would change no state
        and append no rows.
        """
        if until_ns % HALF_TICK_NS:
            raise ValueError(f"until_ns {until_ns} not a multiple of {HALF_TICK_NS}")
        last = until_ns // HALF_TICK_NS
        if self.tick == 0 and last >= 0:
            self.step()
        while self.tick <= last:
            nxt = self._next_event_tick(last)
            if nxt > last:
                self.tick = last + 1
                break
            self.tick = nxt
            self.step()
        return self

    def trace(self, until_ns=None) -> Trace:
        until = self.time_ns - HALF_TICK_NS if until_ns is None else until_ns
        return Trace(sort_rows(list(self.rows)), dict(self.meta), until)

    def run(self, until_ns: int) -> Trace:
        self.run_until(until_ns)
        return self.trace(until_ns)


def run(mapping, stimulus, schedule=(), until_ns=0, config=SimConfig(), probes=(), meta=None) -> Trace:
    return Simulation(mapping, stimulus, schedule, config, probes, meta).run(until_ns)


def golden_run(mapping, stimulus, until_ns, config=SimConfig(), probes=(), meta=None) -> Trace:
    """Fault-free reference run."""
    return run(mapping, stimulus, (), until_ns, config, probes, meta)


def signal_state_at(trace: Trace, t_ns: int):
    state = {}
    for r in trace.rows:
        if r[0] > t_ns:
            break
        if r[1] == "SIGNAL":
            state[r[2]] = r[3]
    return state


def equivalent_from(trace: Trace, golden: Trace, t_ns: int) -> bool:
    """Signal values agree at every half-tick from ``t_ns`` to the end."""
    a = [r for r in trace.signals() if r[0] > t_ns]
    b = [r for r in golden.signals() if r[0] > t_ns]
    return a == b and signal_state_at(trace, t_ns) == signal_state_at(golden, t_ns)
