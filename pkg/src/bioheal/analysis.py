"""Resilience metrics, the four-architecture comparison and recovery latencies."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .fabric import CELLS_PER_SIDE, STEM_CELLS


class DomainError(ValueError):
    pass


def coverage(scs, spf: int) -> Fraction:
    """Share of the assumed worst-case permanent faults that spares can absorb, capped at 1."""
    if spf <= 0:
        raise DomainError("SPF must be positive")
    if scs < 0:
        raise DomainError("spare count must be non-negative")
    return min(Fraction(scs) / spf, Fraction(1))


def area_overhead(spares, routing, functional) -> Fraction:
    """(spares + routing) / functional, in percent."""
    if functional <= 0:
        raise DomainError("functional cell count must be positive")
    return (Fraction(spares) + Fraction(routing)) / Fraction(functional) * 100


def render_ratio(x: Fraction) -> str:
    """Truncate to 3 decimals and drop trailing zeros: 1/3 -> 0.333, 2/3 -> 0.666, 1 -> 1."""
    thousandths = x.numerator * 1000 // x.denominator
    whole, frac = divmod(thousandths, 1000)
    return str(whole) if frac == 0 else f"{whole}.{frac:03d}".rstrip("0")


def render_percent(x: Fraction) -> str:
    return render_ratio(x) + "%"


@dataclass(frozen=True)
class Architecture:
    name: str
    spare_eighths: int  # spares = spare_eighths * N^2 / 8
    routing_eighths: int

    # exact: N^2/8 is fractional when N is not a multiple of 4
    def spares(self, n: int) -> Fraction:
        return Fraction(self.spare_eighths * n * n, 8)

    def routing(self, n: int) -> Fraction:
        return Fraction(self.routing_eighths * n * n, 8)


# counts in units of N^2/8
ARCHITECTURES = (
    Architecture("proposed", 6, 0),  # N^2/2 + N^2/4
    Architecture("re-routing", 2, 4),  # N^2/4 spares, N^2/2 routing
    Architecture("gene-control", 4, 0),  # N^2/2
    Architecture("voting-by-majority", 5, 0),  # N^2/2 + N^2/8
)


def functional_cells(n: int) -> Fraction:
    return Fraction(n * n, 2)


@dataclass(frozen=True)
class ArchRow:
    name: str
    n: int
    functional: Fraction
    spares: Fraction
    routing: Fraction
    coverage: Fraction
    overhead: Fraction


def architecture_table(n: int, spf: int):
    if n < 2 or n % 2:
        raise DomainError(f"N must be an even number >= 2, got {n}")
    rows = []
    for a in ARCHITECTURES:
        f, s, r = functional_cells(n), a.spares(n), a.routing(n)
        rows.append(ArchRow(a.name, n, f, s, r, coverage(s, spf), area_overhead(s, r, f)))
    return rows


def table_text(n: int, spf: int) -> str:
    lines = ["architecture,functional,spares,routing,coverage,overhead"]
    for r in architecture_table(n, spf):
        lines.append(f"{r.name},{render_ratio(r.functional)},{render_ratio(r.spares)},{render_ratio(r.routing)},"
                     f"{render_ratio(r.coverage)},{render_percent(r.overhead)}")
    return "\n".join(lines) + "\n"


def series_text(ns, spf: int) -> str:
    """Coverage and overhead against N, one row per (N, architecture)."""
    lines = ["n,architecture,coverage,overhead_percent"]
    for n in ns:
        for r in architecture_table(n, spf):
            lines.append(f"{n},{r.name},{render_ratio(r.coverage)},{render_ratio(r.overhead)}")
    return "\n".join(lines) + "\n"


def physical_spares_per_layer() -> dict:
    """Spare pool the simulator actually builds for one layer."""
    t = 2 * CELLS_PER_SIDE
    stem_units = 2 * sum(len(v) for v in STEM_CELLS.values())
    return {"T": t, "stem_units": stem_units, "total": t + stem_units}


def recovery_latency(trace):
    """Per permanent fault: ``(fault id, target, latency_ns or None)``.

    A fault is paired with the DEACTIVATE of its target cell and the first
    completion of the spare the following REROUTE brought in.
    """
    faults = []
    for t, kind, name, value in trace.rows:
        if kind != "FAULT":
            continue
        fkind, targets, _ = value.split(":", 2)
        if fkind == "transient":
            continue
        for tgt in targets.split("+"):
            faults.append((t, name, tgt.rsplit(".gfb", 1)[0]))
    spare_of = {}  # failed addr -> (heal time, spare)
    done_at = {}
    for t, kind, name, value in trace.rows:
        if kind == "HEAL" and name == "REROUTE":
            subj, obj, _ = value.split(",")
            spare_of.setdefault(subj, (t, obj))
        elif kind == "EVENT" and name == "heal_complete":
            done_at.setdefault(value, t)
    out = []
    for t, fid, addr in faults:
        hit = spare_of.get(addr)
        lat = None
        if hit is not None and hit[0] >= t and hit[1] in done_at:
            lat = done_at[hit[1]] - t
        out.append((fid, addr, lat))
    return out
