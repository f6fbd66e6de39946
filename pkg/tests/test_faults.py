import dataclasses
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bioheal.campaign import REPORT_HEADER, classify, port_names, run_campaign, run_scenario
from bioheal.fabric import CellAddr
from bioheal.faults import FaultKind, ScheduleError, format_schedule, parse_schedule
from bioheal.scenario import Scenario
from bioheal.sim import Simulation, golden_run

from conftest import constant_stimulus, tiny_mapping


def test_parse_transient_line():
    (f,) = parse_schedule("180,transient,L.B0.hru1.rep2,flip:0x0004\n")
    assert (f.id, f.time_ns, f.kind) == ("f0", 180, FaultKind.TRANSIENT_REG)
    assert f.targets[0].addr == CellAddr("L", "B", 0, 0)
    assert (f.targets[0].hru, f.targets[0].replica, f.mask) == (1, 2, 4)


def test_parse_sorts_and_numbers():
    text = ("# comment\n400,ccf,L.B0.gfb0+L.B0.gfb1,stuck1:0x0100\n"
            "230,permanent,R.B1@1.gfb1,stuck0:1\n")
    sched = parse_schedule(text)
    assert [(f.id, f.time_ns) for f in sched] == [("f0", 230), ("f1", 400)]
    assert sched[1].kind is FaultKind.CCF and len(sched[1].targets) == 2
    assert parse_schedule(format_schedule(sched)) == sched


def test_empty_schedule():
    assert parse_schedule("") == ()
    assert parse_schedule("# nothing\n\n") == ()


@pytest.mark.parametrize("line, msg", [
    ("7,transient,L.B0.hru0.rep0,flip:0x0001", "time not multiple of 5"),
    ("10,bitrot,L.B0.gfb0,stuck0:1", "malformed kind"),
    ("10,permanent,Q.B0.gfb0,stuck0:1", "unknown address"),
    ("10,permanent,L.B9.gfb0,stuck0:1", "unknown address"),
    ("10,permanent,L.B0.gfb2,stuck0:1", "gfb"),
    ("10,transient,L.B0.hru4.rep0,flip:1", "replica"),
    ("10,transient,L.B0.gfb0,flip:1", "transient"),
    ("10,permanent,L.B0.gfb0+L.B1.gfb0,stuck0:1", "exactly one"),
    ("10,ccf,L.B0.gfb0,stuck0:1", "at least two"),
    ("10,permanent,L.B0.gfb0,stuck0:0", "nonzero"),
    ("10,permanent,L.B0.gfb0", "expected"),
])
def test_schedule_errors_carry_line_numbers(line, msg):
    with pytest.raises(ScheduleError) as e:
        parse_schedule("\n" + line + "\n")
    assert str(e.value).startswith("line 2:")
    assert msg in str(e.value)


@pytest.mark.parametrize("tgt", ["H.FMU0", "FHS.gfb0", "SSC.hru0.rep0"])
def test_healing_layer_targets_rejected(tgt):
    with pytest.raises(ScheduleError, match="healing-layer"):
        parse_schedule(f"10,permanent,{tgt},stuck0:1\n")


def test_schedule_beyond_fabric_layers(edg):
    sc = edg.with_schedule("10,permanent,L.B0@2.gfb0,stuck0:1\n", "x")
    with pytest.raises(ScheduleError, match="unknown address"):
        sc.schedule()


def test_every_single_transient_position_is_masked():
    m = tiny_mapping()
    stim = constant_stimulus({"a": 1, "b": 1})
    gold = golden_run(m, stim, 200)
    for t in (0, 35, 40, 75):
        for hru in range(4):
            for rep in range(3):
                sched = parse_schedule(f"{t},transient,L.B0.hru{hru}.rep{rep},flip:0x0001\n")
                tr = Simulation(m, stim, sched).run(200)
                assert tr.signals() == gold.signals(), (t, hru, rep)
                assert classify(tr, gold, sched, port_names(m)).masked == 1


def test_ccf_on_identical_copies_goes_unflagged(edg):
    m = edg.mapping()
    home = m.blocks["c7"]
    sc = edg.with_schedule(f"230,ccf,{home}.gfb0+{home}.gfb1,stuck1:0x0002\n", "edg_ccf")
    sim = sc.simulation()
    tr = sim.run(sc.until_ns)
    assert tr.of_kind("HEAL") == []
    res = classify(tr, sc.golden(), sim.schedule, port_names(m))
    assert (res.injected, res.unhealed, res.healed) == (2, 2, 0)
    assert res.verdict == "diverged"


def test_thirteen_permanents_exhaust_one_side(edg):
    """Chase one function across its spares, then hit other live cells on the same side."""
    m = edg.mapping()
    sim = edg.simulation(golden=True)
    sched = []
    for k in range(13):
        t = 230 + 200 * k
        sim.run_until(t - 5)
        live = sorted(p for p in sim.fabric.routing.producers() if p.side == "L" and p.layer == 0)
        # once the side is exhausted, later faults land on dead cells
        target = sim.fabric.routing.live.get(CellAddr("L", "B", 0, 0)) or (live or [CellAddr("L", "B", 0, 0)])[0]
        (f,) = parse_schedule(f"{t},permanent,{target}.gfb0,stuck1:0x0002\n")
        f = dataclasses.replace(f, id=f"f{k}")
        sched.append(f)
        sim.schedule.append(f)
    until = 230 + 200 * 13
    tr = sim.run(until)
    gold = golden_run(m, edg.stimulus(), until, edg.config())
    res = classify(tr, gold, sched, port_names(m))
    assert res.injected == 13
    assert res.masked + res.healed + res.unhealed == 13
    assert res.unhealed >= 1


def test_case_study_campaign():
    rep = run_campaign(["ccs_transients", "ccs_permanents"])
    tot = rep.total()
    assert (tot.masked, tot.healed, tot.unhealed) == (3, 2, 0)


SHIPPED = ["ccs", "ccs_transients", "ccs_permanents", "edg", "edg_two_permanent", "edg_chain"]


def test_conservation_and_repeatability():
    a = run_campaign(SHIPPED)
    for r in a.results + [a.total()]:
        assert r.masked + r.healed + r.unhealed == r.injected
    assert a.to_csv() == run_campaign(SHIPPED).to_csv()


def test_workers_do_not_change_report():
    assert run_campaign(SHIPPED[:3], workers=2).to_csv() == run_campaign(SHIPPED[:3]).to_csv()


def test_empty_campaign():
    rep = run_campaign([])
    assert rep.results == [] and rep.to_csv() == REPORT_HEADER + "\n"


def test_bad_scenario_becomes_error_row(tmp_path, assets):
    bad = tmp_path / "bad.json"
    (tmp_path / "bad.sched").write_text("7,transient,L.B0.hru0.rep0,flip:1\n")
    raw = json.loads((assets / "edg.json").read_text())
    raw.update(schedule="bad.sched", netlist=str(assets / "edg.fbd"), stimulus=str(assets / "edg.stim"))
    bad.write_text(json.dumps(raw))
    rep = run_campaign([str(bad), "edg", str(tmp_path / "missing.json")])
    assert [r.verdict for r in rep.results] == ["error", "equivalent", "error"]
    assert "line 1" in rep.results[0].error
    assert len(rep.errors) == 2


def test_run_scenario_accepts_objects(edg):
    assert run_scenario(edg).row() == run_scenario("edg").row()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 60), st.integers(0, 3), st.integers(0, 2), st.integers(0, 15))
def test_random_single_transient_on_edg_is_transparent(slot, hru, rep, bit):
    sc = Scenario.load("edg")
    m = sc.mapping()
    home = sorted(m.codes)[slot % len(m.codes)]
    line = f"{slot * 5},transient,{home}.hru{hru}.rep{rep},flip:0x{1 << bit:04X}\n"
    res = run_scenario(sc.with_schedule(line, "t"))
    assert (res.injected, res.masked, res.verdict) == (1, 1, "equivalent")
