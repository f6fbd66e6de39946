import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bioheal.blocks import Op
from bioheal.fabric import (
    LEGAL_TRANSITIONS,
    CellAddr,
    ConfigurationError,
    Fabric,
    FunctionCell,
    GeneticCode,
    HruState,
    Mode,
    SpareExhausted,
    StructuralError,
    cell_fire,
    hru_step,
    layer_addresses,
    port,
)

words = st.integers(0, 0xFFFF)


@pytest.mark.parametrize("text", ["L.B0", "R.T3", "L.S0.u1", "R.S3.u0", "L.B2@1", "R.S1.u1@2"])
def test_address_round_trip(text):
    assert str(CellAddr.parse(text)) == text


@pytest.mark.parametrize("text", ["X.B0", "L.B4", "L.S1.u0", "R.S0.u0", "L.S0", "L.B0.u1", "L.S0.u2"])
def test_bad_addresses_rejected(text):
    with pytest.raises(ConfigurationError):
        CellAddr.parse(text)


def test_layer_has_8_b_8_t_8_stem_units():
    kinds = [a.kind for a in layer_addresses(0)]
    assert (kinds.count("B"), kinds.count("T"), kinds.count("S")) == (8, 8, 8)


def test_addresses_survive_pickling():
    import pickle
    a = CellAddr.parse("L.S2.u1@1")
    b = pickle.loads(pickle.dumps(a))
    assert a == b and hash(a) == hash(b) and {a: 1}[b] == 1


def test_selectors_beyond_arity_are_dont_care():
    a = GeneticCode(Op.NOT, (port("x"), port("y")))
    b = GeneticCode(Op.NOT, (port("x"),))
    assert a == b


@given(words, st.integers(0, 2), words.filter(bool))
def test_hru_masks_any_single_replica_upset(v, rep, mask):
    out, flagged, unmaskable = hru_step(HruState(), v, [(rep, mask)])
    assert out == v and flagged and not unmaskable


def test_hru_switch_leaves_a_flagged_active_replica():
    h = HruState()
    hru_step(h, 3, [(0, 1)])
    assert h.active_replica == 1
    hru_step(h, 3, [(1, 1)])
    assert h.active_replica == 0


def test_hru_three_way_upset_is_unmaskable():
    out, flagged, unmaskable = hru_step(HruState(), 0, [(1, 1), (2, 2)])
    assert flagged and unmaskable and out == 0  # active replica 0 passes through


def _active_cell(op=Op.AND):
    c = FunctionCell(CellAddr.parse("L.B0"), Mode.ACTIVE, [GeneticCode(op, (port("a"), port("b")))])
    return c


def test_dwc_flag_needs_k_consecutive_mismatches():
    c = _active_cell(Op.OR)
    c.stuck[0].add(1, 0)
    assert cell_fire(c, [1, 0, 0, 0], threshold=2)[2] is False
    assert cell_fire(c, [1, 0, 0, 0], threshold=2)[2] is True


def test_dwc_counter_resets_on_agreement():
    c = _active_cell(Op.OR)
    c.stuck[0].add(1, 0)
    cell_fire(c, [1, 0, 0, 0], threshold=2)
    cell_fire(c, [0, 0, 0, 0], threshold=2)  # stuck-at-0 invisible when output is 0
    assert cell_fire(c, [1, 0, 0, 0], threshold=2)[2] is False


def test_identical_faults_on_both_copies_are_invisible():
    c = _active_cell(Op.OR)
    c.stuck[0].add(1, 0)
    c.stuck[1].add(1, 0)
    out, _, flag = cell_fire(c, [1, 0, 0, 0], threshold=1)
    assert out == 0 and flag is False


def test_cell_latency_is_seven_half_ticks():
    assert cell_fire(_active_cell(), [1, 1, 0, 0])[1] == 7


@given(st.lists(st.tuples(st.sampled_from(list(Mode)), st.sampled_from(list(Mode))), max_size=20))
def test_mode_machine_rejects_illegal_transitions(steps):
    fab = Fabric(1)
    a = CellAddr.parse("L.T0")
    for src, dst in steps:
        fab.cells[a].mode = src
        if (src, dst) in LEGAL_TRANSITIONS:
            fab.set_mode(a, dst)
            assert fab.cells[a].mode is dst
        else:
            with pytest.raises(StructuralError):
                fab.set_mode(a, dst)


def test_t_cells_hold_four_slots_b_cells_one():
    fab = Fabric(1)
    code = GeneticCode(Op.NOT, (port("a"),))
    fab.load_code(CellAddr.parse("L.T0"), code, 3)
    assert fab.read_code(CellAddr.parse("L.T0"), 3) == code
    with pytest.raises(ConfigurationError):
        fab.load_code(CellAddr.parse("L.B0"), code, 1)
    with pytest.raises(ConfigurationError):
        fab.load_code(CellAddr.parse("L.T0"), code, 4)


def test_reroute_rules():
    fab = Fabric(1)
    b0, t0, rt0 = (CellAddr.parse(x) for x in ("L.B0", "L.T0", "R.T0"))
    fab.set_mode(b0, Mode.ACTIVE)
    fab.routing.add_function(b0)
    with pytest.raises(StructuralError):
        fab.reroute(b0, t0)  # still alive
    fab.set_mode(b0, Mode.DEAD)
    with pytest.raises(StructuralError):
        fab.reroute(b0, rt0)  # other side
    fab.reroute(b0, t0)
    assert fab.routing.live[b0] == t0
    with pytest.raises(SpareExhausted):
        fab.reroute(b0, t0)


def test_dump_lists_every_cell():
    assert len(Fabric(2).dump().splitlines()) == 48


@pytest.mark.parametrize("side,idx", list(itertools.product("LR", range(4))))
def test_every_b_cell_starts_idle(side, idx):
    assert Fabric(1)[CellAddr(side, "B", idx)].mode is Mode.IDLE
