import pytest

from bioheal.netlist import parse_netlist, place
from bioheal.scenario import Scenario, assets_dir
from bioheal.sim import Stimulus


@pytest.fixture(scope="session")
def assets():
    return assets_dir()


@pytest.fixture(scope="session")
def ccs():
    return Scenario.load("ccs")


@pytest.fixture(scope="session")
def edg():
    return Scenario.load("edg")


@pytest.fixture(scope="session")
def ccs_golden(ccs):
    return ccs.golden()


def constant_stimulus(values):
    return Stimulus({p: [(0, v)] for p, v in values.items()})


def tiny_mapping(src="in a:bool\nin b:bool\nblk g = AND(a, b)\nout y = g\n"):
    return place(parse_netlist(src))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])
