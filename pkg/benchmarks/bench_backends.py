#!/usr/bin/env python3
"""Compare the compiled stepping core against the pure-Python fallback.

Runs the same scenarios through both backends, checks the outputs are
bit-identical, and reports wall-clock timings.

Usage:  python3 benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import time

import numpy as np

from selmut import _backend
from selmut.dynamics import IntegratorConfig, integrate
from selmut.kernel import identity_kernel, uniform_kernel, blend_toward
from selmut.measure import AtomicMeasure, StrategySpace
from selmut.vitals import RickerModel


def make_cases():
    cases = []

    sp3 = StrategySpace.from_points([("fast", 0.0), ("fit", 1.0), ("weak", 2.0)])
    cases.append((
        "3-atom pure selection, t=200",
        sp3,
        RickerModel([20.0, 10.0, 1.0], [5.0, 0.5, 0.5], 0.5),
        identity_kernel(sp3),
        AtomicMeasure(sp3, [1.0, 1.0, 1.0]),
        IntegratorConfig(t_end=200.0, dt_out=0.1),
    ))

    n = 40
    spn = StrategySpace.grid_1d(0.0, 2.0, n)
    q = np.linspace(0.0, 2.0, n)
    kappa = 4.0 + 8.0 * np.exp(-((q - 0.7) ** 2) / 0.18)
    cases.append((
        f"{n}-atom mutation blend, t=120",
        spn,
        RickerModel(kappa, np.full(n, 0.5), 0.5),
        blend_toward(identity_kernel(spn), uniform_kernel(spn), 0.01),
        AtomicMeasure(spn, np.full(n, 0.05)),
        IntegratorConfig(t_end=120.0, dt_out=0.5),
    ))

    return cases


def run_case(backend_name, case, repeat):
    _, space, model, kern, mu0, cfg = case
    best = float("inf")
    traj = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = integrate(mu0, kern, model, cfg, backend=backend_name)
        best = min(best, time.perf_counter() - t0)
    return best, traj


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3,
                        help="timing repetitions per case (best-of)")
    args = parser.parse_args()

    if not _backend.HAVE_COMPILED:
        print("compiled core not available; nothing to compare "
              "(pure-Python backend is the only one installed)")
        return 0

    print(f"{'case':<34} {'compiled':>10} {'python':>10} {'speedup':>8}  match")
    failures = 0
    for case in make_cases():
        name = case[0]
        tc, trc = run_case("compiled", case, args.repeat)
        tp, trp = run_case("python", case, args.repeat)
        same = (np.array_equal(trc.times, trp.times)
                and np.array_equal(trc.weights, trp.weights))
        if not same:
            failures += 1
        print(f"{name:<34} {tc * 1e3:>8.1f}ms {tp * 1e3:>8.1f}ms "
              f"{tp / tc:>7.1f}x  {'bit-identical' if same else 'MISMATCH'}")
    if failures:
        print(f"\n{failures} case(s) disagreed between backends")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
