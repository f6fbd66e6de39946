"""Multi-scenario fault campaigns diffed against golden runs."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .analysis import recovery_latency
from .faults import FaultKind
from .scenario import Scenario
from .sim import Trace, signal_state_at

REPORT_HEADER = "scenario,injected,masked,healed,unhealed,latencies_ns,verdict"


@dataclass
class ScenarioResult:
    scenario: str
    injected: int = 0
    masked: int = 0
    healed: int = 0
    unhealed: int = 0
    latencies: list = field(default_factory=list)
    verdict: str = "equivalent"
    error: str | None = None

    def row(self) -> str:
        lat = ";".join(str(x) for x in self.latencies)
        return (f"{self.scenario},{self.injected},{self.masked},{self.healed},"
                f"{self.unhealed},{lat},{self.verdict}")


@dataclass
class CampaignReport:
    results: list = field(default_factory=list)

    def total(self) -> ScenarioResult:
        t = ScenarioResult("TOTAL", verdict="")
        for r in self.results:
            t.injected += r.injected
            t.masked += r.masked
            t.healed += r.healed
            t.unhealed += r.unhealed
            t.latencies += r.latencies
        return t

    def to_csv(self) -> str:
        lines = [REPORT_HEADER] + [r.row() for r in self.results]
        if self.results:
            lines.append(self.total().row())
        return "\n".join(lines) + "\n"

    @property
    def errors(self):
        return [(r.scenario, r.error) for r in self.results if r.error]


def port_signals(trace: Trace, ports):
    return [r for r in trace.signals() if r[2] in ports]


def _same_from(trace, golden, names, t_ns):
    a = [r for r in port_signals(trace, names) if r[0] > t_ns]
    b = [r for r in port_signals(golden, names) if r[0] > t_ns]
    sa = {k: v for k, v in signal_state_at(trace, t_ns).items() if k in names}
    sb = {k: v for k, v in signal_state_at(golden, t_ns).items() if k in names}
    return a == b and sa == sb


def port_names(mapping):
    names = set(mapping.inputs)
    for o in mapping.outputs:
        names |= {o, f"{o}.valid"}
    return names


def classify(trace: Trace, golden: Trace, schedule, ports, name="scenario") -> ScenarioResult:
    """Per-fault accounting; CCF members are counted one by one."""
    res = ScenarioResult(name)
    unmaskable = set()
    no_effect = set()
    for _, kind, ev, value in trace.rows:
        if kind != "EVENT":
            continue
        fid, _, where = value.partition(":")
        if ev == "unmaskable_transient":
            unmaskable.update(fid.split(","))
        elif ev == "fault_no_effect":
            no_effect.add((fid, where))
    deact = {}
    rerouted = set()
    for t, kind, act, value in trace.rows:
        if kind == "HEAL":
            subj = value.split(",")[0]
            if act == "DEACTIVATE":
                deact.setdefault(subj, t)
            elif act == "REROUTE":
                rerouted.add(subj)
    ports_equal = port_signals(trace, ports) == port_signals(golden, ports)
    for f in schedule:
        for tgt in f.targets:
            res.injected += 1
            if f.kind is FaultKind.TRANSIENT_REG:
                if f.id in unmaskable:
                    res.unhealed += 1
                else:
                    res.masked += 1
                continue
            addr = str(tgt.addr)
            if (f.id, str(tgt)) in no_effect:
                res.masked += 1
            elif addr in deact and deact[addr] >= f.time_ns:
                if addr in rerouted:
                    res.healed += 1
                else:
                    res.unhealed += 1
            elif ports_equal:
                res.masked += 1
            else:
                res.unhealed += 1
    res.latencies = [lat for _, _, lat in recovery_latency(trace) if lat is not None]
    if trace.signals() == golden.signals():
        res.verdict = "equivalent"
    else:
        heals = [r[0] for r in trace.rows if r[1] == "EVENT" and r[2] == "heal_complete"]
        last = max(heals, default=None)
        if last is not None and _same_from(trace, golden, ports, last):
            res.verdict = "recovered"
        else:
            res.verdict = "diverged"
    return res


def run_scenario(sc) -> ScenarioResult:
    """``sc`` is a Scenario or a scenario reference; errors in its files become an error row."""
    name = sc if isinstance(sc, str) else sc.name
    try:
        if isinstance(sc, str):
            sc = Scenario.load(sc)
        sim = sc.simulation()
        trace = sim.run(sc.until_ns)
        golden = sc.golden()
        return classify(trace, golden, sim.schedule, port_names(sim.mapping), sc.name)
    except (ValueError, KeyError, OSError) as e:
        return ScenarioResult(name, verdict="error", error=str(e))


def run_campaign(scenarios, workers: int = 1) -> CampaignReport:
    """Run every scenario and fold results in the given order."""
    scenarios = list(scenarios)
    if workers > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(run_scenario, scenarios))
    else:
        results = [run_scenario(s) for s in scenarios]
    return CampaignReport(results)
