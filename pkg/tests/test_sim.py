import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bioheal.campaign import classify, port_names
from bioheal.netlist import parse_netlist, place
from bioheal.scenario import Scenario
from bioheal.sim import (
    HALF_TICK_NS,
    KIND_RANK,
    SimConfig,
    Simulation,
    Stimulus,
    StimulusError,
    Trace,
    equivalent_from,
    golden_run,
    parse_stimulus,
    run,
)

from conftest import constant_stimulus, tiny_mapping


def test_empty_netlist_only_advances_clock():
    m = place(parse_netlist(""))
    sim = Simulation(m)
    sim.run_until(100)
    assert sim.time_ns == 105
    assert sim.trace(100).signals() == []


def test_run_to_zero_has_only_initial_rows():
    tr = run(tiny_mapping(), constant_stimulus({"a": 1, "b": 1}), until_ns=0)
    assert tr.rows and all(r[0] == 0 for r in tr.rows)
    assert {r[2] for r in tr.rows} >= {"a", "b", "y", "y.valid"}


def test_and_gate_latency():
    tr = run(tiny_mapping(), constant_stimulus({"a": 1, "b": 1}), until_ns=100)
    # one firing: start at 0, output visible 7 half-ticks later
    assert tr.first_time("y", lambda v: v == 1) == 35
    assert tr.first_time("y.valid", lambda v: v == 1) == 35


def test_ccs_target_and_throttle_timing(ccs_golden):
    assert ccs_golden.first_time("Target", lambda v: v == 50) == 35
    assert ccs_golden.first_time("Throttle.valid", lambda v: v == 1) == 430


def test_runs_are_byte_identical(ccs):
    assert ccs.run().to_csv() == ccs.run().to_csv()


def test_csv_round_trip(ccs_golden):
    text = ccs_golden.to_csv()
    back = Trace.from_csv(text)
    assert back.rows == ccs_golden.rows
    assert back.meta == {k: str(v) for k, v in ccs_golden.meta.items()}
    assert back.to_csv() == text


def test_committed_goldens_match(ccs, edg):
    for sc in (ccs, edg):
        assert sc.golden().to_csv() == sc.committed_golden().to_csv()


@pytest.mark.parametrize("text, msg", [
    ("0,a,1\n7,a,0\n", "multiple of 5"),
    ("0,a\n", "expected"),
    ("0,a,x\n", "bad number"),
    ("5,a,1\n", "t=0"),
    ("0,a,1\n0,a,0\n", "strictly increasing"),
])
def test_stimulus_errors(text, msg):
    with pytest.raises(StimulusError, match=msg):
        parse_stimulus(text)


def test_stimulus_text_round_trip(ccs):
    stim = ccs.stimulus()
    assert parse_stimulus(stim.to_text()) == stim


def test_golden_has_no_fault_or_heal_rows(ccs_golden):
    assert ccs_golden.of_kind("FAULT") == [] and ccs_golden.of_kind("HEAL") == []


def test_golden_equals_faulted_run_under_transients(ccs, ccs_golden):
    sched = Scenario.load("ccs_transients").schedule()
    tr = Simulation(ccs.mapping(), ccs.stimulus(), sched, ccs.config(), ccs.probes).run(ccs.until_ns)
    assert tr.of_kind("FAULT")
    assert tr.signals() == ccs_golden.signals()


@pytest.mark.parametrize("name", ["ccs_permanents", "edg_two_permanent", "edg_chain"])
def test_trace_rows_ordered_aligned_and_causal(name):
    tr = Scenario.load(name).run()
    keys = [(r[0], KIND_RANK[r[1]]) for r in tr.rows]
    assert keys == sorted(keys)
    assert all(r[0] % HALF_TICK_NS == 0 for r in tr.rows)
    first_fault = min(r[0] for r in tr.of_kind("FAULT"))
    assert all(r[0] >= first_fault for r in tr.of_kind("HEAL"))


def test_post_heal_equivalence_edg():
    sc = Scenario.load("edg_two_permanent")
    tr, gold = sc.run(), sc.golden()
    done = max(r[0] for r in tr.rows if r[2] == "heal_complete")
    assert equivalent_from(tr, gold, done)


def test_golden_run_matches_run_without_schedule(edg):
    m, stim = edg.mapping(), edg.stimulus()
    assert golden_run(m, stim, 200, edg.config()).rows == run(m, stim, (), 200, edg.config()).rows


def test_config_rejects_period_below_latency():
    with pytest.raises(ValueError):
        SimConfig(period_half_ticks=6)


def _edg_home_value(edg, addr, t_ns):
    sim = edg.simulation(golden=True)
    sim.run_until(t_ns)
    return sim.fabric.routing.value[addr]


@pytest.mark.parametrize("idx", range(16))
def test_single_permanent_on_any_edg_b_cell_heals(edg, idx):
    m = edg.mapping()
    addr = sorted(m.codes)[idx]
    t = 230
    # stick the low bit to the opposite of what the cell currently drives
    stuck = "stuck0" if _edg_home_value(edg, addr, t) & 1 else "stuck1"
    sc = edg.with_schedule(f"{t},permanent,{addr}.gfb0,{stuck}:0x0001\n", f"edg_perm_{idx}")
    sim = sc.simulation()
    tr = sim.run(sc.until_ns)
    gold = sc.golden()
    res = classify(tr, gold, sim.schedule, port_names(m))
    assert (res.healed, res.masked, res.unhealed) == (1, 0, 0)
    done = [r[0] for r in tr.rows if r[2] == "heal_complete"]
    assert len(done) == 1
    ports = port_names(m)
    after = lambda trace: [r for r in trace.signals() if r[2] in ports and r[0] > done[0]]
    assert after(tr) == after(gold)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 40), st.integers(0, 1)), max_size=6))
def test_and_gate_follows_inputs(edges):
    t, pts = 0, [(0, 1)]
    for dt, v in edges:
        t += dt * 5
        pts.append((t, v))
    stim = Stimulus({"a": pts, "b": [(0, 1)]})
    until = t + 100
    tr = run(tiny_mapping(), stim, until_ns=until)
    assert all(r[0] % 5 == 0 for r in tr.rows)
    assert tr.value_at("y", until) == pts[-1][1]
