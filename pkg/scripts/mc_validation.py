"""Monte Carlo oracle agreement and optimality probes at both Exponential benchmarks.

Simulates, in one bundle sharing the Gaussian streams, the injection costs
G_b(y) for b in {0.25, 0.5, 1} and y in {0, 5, 20}, the policy values U(x0) for
x0 in {0, 5, x*+1}, and the four perturbed policies (dx = -5, +5; db = -0.05,
+0.05) for the proportional and the excess-of-loss problem with Exponential
claims. Prints a table and optionally writes it as JSON.

    python3 scripts/mc_validation.py --paths 100000 --dt 1e-3 --seed 42 --out mc.json
"""

from __future__ import annotations

import argparse
import json
import time

from reinsurance_timing import SimConfig, benchmark, solve_policy
from reinsurance_timing.validation import SuiteSpec, validation_suite


def exponential_suites() -> list[SuiteSpec]:
    return [
        SuiteSpec(solve_policy(benchmark("proportional_exponential")), name="prop-exp"),
        SuiteSpec(solve_policy(benchmark("xl_exponential")), name="xl-exp"),
    ]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", help="write the checks as JSON")
    args = ap.parse_args()

    config = SimConfig(dt=args.dt, paths=args.paths, seed=args.seed, workers=args.workers)
    t0 = time.perf_counter()
    report = validation_suite(exponential_suites(), config)
    wall = time.perf_counter() - t0
    for line in report.lines():
        print(line)
    print(f"{len(report.failures())} of {len(report.checks)} checks failed; wall time {wall:.1f} s")
    if args.out:
        doc = {
            "config": {"paths": args.paths, "dt": args.dt, "seed": args.seed},
            "seconds": wall,
            "checks": [
                {
                    "label": c.label,
                    "kind": c.kind,
                    "estimate": c.estimate,
                    "std_error": c.std_error,
                    "target": c.target,
                    "budget": c.budget,
                    "euler": c.euler,
                    "passed": c.passed,
                }
                for c in report.checks
            ],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)


if __name__ == "__main__":
    main()
