"""Scenario configs: one JSON file naming the netlist, stimulus, schedule and timing."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .blocks import PiGains
from .faults import check_layers, parse_schedule
from .netlist import parse_netlist, place
from .sim import SimConfig, Simulation, Trace, parse_stimulus

_CONFIG_KEYS = {
    "name", "netlist", "stimulus", "schedule", "constants", "period_half_ticks",
    "heal_settle_half_ticks", "dwc_threshold", "layer_phase_half_ticks", "gains",
    "horizon_half_ticks", "until_ns", "probes", "golden", "seed", "notes",
}


class ScenarioError(ValueError):
    pass


def assets_dir() -> Path:
    return Path(str(resources.files("bioheal") / "assets"))


def shipped_scenarios():
    return sorted(p.stem for p in assets_dir().glob("*.json"))


@dataclass
class Scenario:
    name: str
    raw: dict
    base: Path
    texts: dict = field(default_factory=dict)  # role -> file contents

    @classmethod
    def load(cls, ref) -> "Scenario":
        """``ref`` is a path to a JSON file or the name of a shipped scenario."""
        path = Path(ref)
        if not path.suffix:
            path = assets_dir() / f"{ref}.json"
        if not path.is_file():
            raise ScenarioError(f"{ref}: no such scenario file")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ScenarioError(f"{path}:{e.lineno}: {e.msg}") from None
        return cls.from_dict(raw, path.parent, raw.get("name", path.stem))

    @classmethod
    def from_dict(cls, raw: dict, base=".", name=None) -> "Scenario":
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ScenarioError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key in ("netlist", "stimulus", "until_ns"):
            if key not in raw:
                raise ScenarioError(f"config lacks {key!r}")
        sc = cls(name or raw.get("name", "scenario"), dict(raw), Path(base))
        for role in ("netlist", "stimulus", "schedule"):
            if raw.get(role):
                p = sc.base / raw[role]
                if not p.is_file():
                    raise ScenarioError(f"{role} file {p} not found")
                sc.texts[role] = p.read_text()
        return sc

    def with_schedule(self, text: str, name: str) -> "Scenario":
        """Copy of this scenario running a generated fault schedule."""
        raw = dict(self.raw, name=name, schedule=f"<{name}>")
        return Scenario(name, raw, self.base, dict(self.texts, schedule=text))

    def path(self, role):
        return self.base / self.raw[role]

    @property
    def until_ns(self) -> int:
        return int(self.raw["until_ns"])

    @property
    def horizon(self) -> int:
        return int(self.raw.get("horizon_half_ticks", 8))

    @property
    def probes(self):
        return tuple(self.raw.get("probes", ()))

    def config(self) -> SimConfig:
        g = self.raw.get("gains", {})
        return SimConfig(
            period_half_ticks=int(self.raw.get("period_half_ticks", 8)),
            heal_settle_half_ticks=int(self.raw.get("heal_settle_half_ticks", 7)),
            dwc_threshold=int(self.raw.get("dwc_threshold", 2)),
            layer_phase_half_ticks=tuple(self.raw.get("layer_phase_half_ticks", ())),
            gains=PiGains(**g),
        )

    def netlist(self):
        return parse_netlist(self.texts["netlist"])

    def mapping(self):
        return place(self.netlist(), constants=self.raw.get("constants", {}))

    def stimulus(self):
        return parse_stimulus(self.texts["stimulus"])

    def schedule(self):
        if "schedule" not in self.texts:
            return ()
        sched = parse_schedule(self.texts["schedule"])
        check_layers(sched, max(self.netlist().levels, default=1))
        return sched

    def digest(self, with_schedule=True) -> str:
        """sha256 over the canonical config and the contents of every file it names."""
        keys = {k: v for k, v in self.raw.items() if k not in ("name", "golden", "notes")}
        if not with_schedule:
            keys.pop("schedule", None)
        h = hashlib.sha256(json.dumps(keys, sort_keys=True, separators=(",", ":")).encode())
        for role in ("netlist", "stimulus", "schedule"):
            if role in self.texts and (with_schedule or role != "schedule"):
                h.update(b"\x00" + role.encode() + b"\x00" + self.texts[role].encode())
        return h.hexdigest()

    def _meta(self, golden):
        return {
            "scenario": self.name,
            "seed": self.raw.get("seed", 0),
            "config_digest": self.digest(with_schedule=not golden),
        }

    def simulation(self, golden=False) -> Simulation:
        sched = () if golden else self.schedule()
        return Simulation(self.mapping(), self.stimulus(), sched, self.config(),
                          self.probes, self._meta(golden))

    def run(self) -> Trace:
        return self.simulation().run(self.until_ns)

    def golden(self) -> Trace:
        return self.simulation(golden=True).run(self.until_ns)

    def committed_golden(self) -> Trace | None:
        if not self.raw.get("golden"):
            return None
        p = self.path("golden")
        return Trace.from_csv(p.read_text()) if p.is_file() else None
