"""Command-line entry point: ``bioheal <subcommand> ...``.

Exit codes: 0 success, 1 domain failure (parse error, violated property,
diverging trace), 2 usage error.
"""
from __future__ import annotations

import argparse
import difflib
import random
import sys
from pathlib import Path

from . import analysis
from .campaign import CampaignReport, ScenarioResult, run_campaign
from .faults import random_transient
from .fabric import FabricError
from .netlist import parse_netlist, place
from .props import PropertyError, check_property
from .scenario import Scenario, ScenarioError, shipped_scenarios
from .sim import Trace


class DomainFailure(Exception):
    pass


def _write(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _signal_lines(trace):
    return [f"{t},{k},{n},{v}" for t, k, n, v in trace.signals()]


def cmd_run(args):
    sc = Scenario.load(args.scenario)
    trace = sc.run()
    _write(trace.to_csv(), args.out)
    if args.diff_golden:
        golden = sc.committed_golden()
        if golden is None:
            raise DomainFailure(f"{sc.name} has no committed golden trace")
        diff = list(difflib.unified_diff(_signal_lines(golden), _signal_lines(trace),
                                         "golden", sc.name, lineterm=""))
        for line in diff:
            print(line, file=sys.stderr)
        if diff:
            raise DomainFailure("signal trace differs from golden")
    return 0


def cmd_golden(args):
    _write(Scenario.load(args.scenario).golden().to_csv(), args.out)
    return 0


def cmd_campaign(args):
    refs = list(args.scenario or [])
    if args.list:
        for line in Path(args.list).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                refs.append(line)
    items = []
    for ref in refs:
        try:
            items.append(Scenario.load(ref))
        except (ScenarioError, ValueError) as e:
            items.append(ScenarioResult(ref, verdict="error", error=str(e)))
    if args.random_transients:
        if args.seed is None:
            raise DomainFailure("--random-transients needs an explicit --seed")
        base = [s for s in items if isinstance(s, Scenario)]
        rng = random.Random(args.seed)
        gen = []
        for sc in base:
            m = sc.mapping()
            for i in range(args.random_transients):
                text = random_transient(rng, m, sc.until_ns)
                gen.append(sc.with_schedule(text, f"{sc.name}_rt{i}"))
        items = gen
    runnable = [s for s in items if isinstance(s, Scenario)]
    done = iter(run_campaign(runnable, args.workers).results)
    report = CampaignReport([next(done) if isinstance(s, Scenario) else s for s in items])
    _write(report.to_csv(), args.out)
    for name, err in report.errors:
        print(f"{name}: {err}", file=sys.stderr)
    return 1 if report.errors else 0


def cmd_metrics(args):
    if args.what == "table":
        text = analysis.table_text(args.n[0], args.spf)
        pool = analysis.physical_spares_per_layer()
        text += (f"# simulated spare pool per layer: {pool['T']} T cells + "
                 f"{pool['stem_units']} stem units = {pool['total']}\n")
    else:
        text = analysis.series_text(args.n, args.spf)
    _write(text, args.out)
    return 0


def cmd_check(args):
    trace = Trace.from_csv(Path(args.trace).read_text())
    golden = Trace.from_csv(Path(args.golden).read_text()) if args.golden else None
    if args.scenario:
        sc = Scenario.load(args.scenario)
        want = {sc.digest(True), sc.digest(False)}
        if trace.meta.get("config_digest") not in want:
            raise DomainFailure(f"{args.trace}: config digest does not match scenario {sc.name}")
        if golden is None:
            golden = sc.committed_golden()
    verdict = check_property(trace, Path(args.prop).read_text(), golden)
    print(verdict)
    return 0 if verdict.status == "HOLDS" else 1


def cmd_place(args):
    if args.scenario:
        m = Scenario.load(args.scenario).mapping()
    else:
        consts = {}
        for kv in args.const or ():
            k, _, v = kv.partition("=")
            consts[k] = int(v, 0)
        m = place(parse_netlist(Path(args.netlist).read_text()), constants=consts)
    _write(m.render(), args.out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="bioheal", description="Self-healing cell fabric simulator.")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a scenario and write its trace")
    r.add_argument("--scenario", required=True, help=f"JSON path or one of {', '.join(shipped_scenarios())}")
    r.add_argument("--out")
    r.add_argument("--diff-golden", action="store_true", help="fail if SIGNAL rows differ from the committed golden")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("golden", help="write the fault-free trace of a scenario")
    g.add_argument("--scenario", required=True)
    g.add_argument("--out")
    g.set_defaults(func=cmd_golden)

    c = sub.add_parser("campaign", help="run several scenarios and write the report")
    c.add_argument("--scenario", action="append")
    c.add_argument("--list", help="file with one scenario reference per line")
    c.add_argument("--random-transients", type=int, default=0, metavar="N",
                   help="replace each scenario's schedule by N random single-replica transients")
    c.add_argument("--seed", type=int)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--out")
    c.set_defaults(func=cmd_campaign)

    m = sub.add_parser("metrics", help="architecture comparison")
    m.add_argument("what", choices=("table", "series"))
    m.add_argument("--n", type=int, nargs="+", default=[4])
    m.add_argument("--spf", type=int, default=12)
    m.add_argument("--out")
    m.set_defaults(func=cmd_metrics)

    k = sub.add_parser("check", help="evaluate a temporal property on a trace")
    k.add_argument("--trace", required=True)
    k.add_argument("--prop", required=True)
    k.add_argument("--golden")
    k.add_argument("--scenario", help="verify the trace's config digest against this scenario")
    k.set_defaults(func=cmd_check)

    pl = sub.add_parser("place", help="print the cell mapping of a netlist")
    src = pl.add_mutually_exclusive_group(required=True)
    src.add_argument("--netlist")
    src.add_argument("--scenario")
    pl.add_argument("--const", action="append", metavar="NAME=VALUE")
    pl.add_argument("--out")
    pl.set_defaults(func=cmd_place)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        return args.func(args)
    except (DomainFailure, ScenarioError, PropertyError, FabricError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
