"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--calls 200000]

Micro-benchmarks time each kernel in a tight loop; the end-to-end rows time
full scenario simulations, where the interpreter-level stepping dominates.
"""
import argparse
import random
import timeit

from bioheal import kernels
from bioheal.scenario import Scenario


def micro_cases(rng, n):
    ops = [rng.randrange(8) for _ in range(n)]
    words = [(rng.randrange(1 << 16), rng.randrange(1 << 16), rng.randrange(2)) for _ in range(n)]
    return {
        "comb_eval": lambda: [kernels.comb_eval(op, a, b, c) for op, (a, b, c) in zip(ops, words)],
        "vote3": lambda: [kernels.vote3(a, a, b) for _, (a, b, _) in zip(ops, words)],
        "apply_stuck": lambda: [kernels.apply_stuck(a, b, c) for _, (a, b, c) in zip(ops, words)],
        "fire_pair": lambda: [kernels.fire_pair(op, a, b, c, 0xFFFF, 0, 0xFFFE, 1)
                              for op, (a, b, c) in zip(ops, words)],
    }


def end_to_end():
    scenarios = {name: Scenario.load(name) for name in ("ccs", "ccs_transients", "edg_chain")}
    return {f"run {name}": (lambda sc=sc: sc.run()) for name, sc in scenarios.items()}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--calls", type=int, default=200_000)
    ap.add_argument("--runs", type=int, default=20, help="simulations per end-to-end sample")
    args = ap.parse_args()

    backends = kernels.available_backends()
    results = {}
    for backend in backends:
        kernels.use_backend(backend)
        cases = micro_cases(random.Random(1), args.calls)
        for name, fn in cases.items():
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            results[name, backend] = best / args.calls * 1e9
    # interleave backends per repeat so machine noise hits both equally
    for name, fn in end_to_end().items():
        samples = {b: [] for b in backends}
        for _ in range(args.repeat):
            for backend in backends:
                kernels.use_backend(backend)
                samples[backend].append(timeit.timeit(fn, number=args.runs))
        for backend in backends:
            results[name, backend] = min(samples[backend]) / args.runs * 1e3

    print(f"{'benchmark':24s}" + "".join(f"{b:>14s}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    names = dict.fromkeys(n for n, _ in results)
    for name in names:
        unit = "ns/call" if not name.startswith("run ") else "ms/run"
        row = [results[name, b] for b in backends]
        line = f"{name:24s}" + "".join(f"{v:10.1f} {unit[:2]:>3s}" for v in row)
        if len(row) > 1:
            line += f"   {row[0] / row[1]:6.2f}x"
        print(line)
    kernels.use_backend(backends[-1])


if __name__ == "__main__":
    main()
