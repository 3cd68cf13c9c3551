"""Write the CSV data behind the sensitivity and comparison figures.

One sweep CSV per (benchmark, parameter), each holding both the b_star and the
x_star column, on 21-point grids within +-50% of the benchmark value:

    proportional            rho, mu, sigma2, K
    excess-of-loss Exp      rho, mu, K
    excess-of-loss Pareto   rho, zeta, K
    value comparison        Exponential and Pareto, x in [0, 40]

Each CSV starts with a ``# params:`` line holding the base problem. The script
also reports whether every column is strictly monotone.

    python3 scripts/figure_data.py --out-dir figures
"""

from __future__ import annotations

import argparse
import csv
import io
from pathlib import Path

import numpy as np

from reinsurance_timing.cli import main as cli

SWEEPS = {
    "proportional": ("rho", "mu", "sigma2", "K"),
    "xl_exponential": ("rho", "mu", "K"),
    "xl_pareto": ("rho", "zeta", "K"),
}
COMPARE = ("proportional_exponential", "xl_pareto")


def read_rows(path: Path) -> list[dict]:
    lines = path.read_text().splitlines()
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def trend(values) -> str:
    d = np.diff(np.asarray(values, dtype=float))
    if np.all(d > 0):
        return "increasing"
    if np.all(d < 0):
        return "decreasing"
    if np.allclose(d, 0.0, atol=1e-12):
        return "constant"
    return "not monotone"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out-dir", default="figures")
    ap.add_argument("--points", type=int, default=21)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    for kind, params in SWEEPS.items():
        for param in params:
            path = out / f"sweep_{kind}_{param}.csv"
            code = cli(["sweep", "--benchmark", kind, "--param", param, "--points", str(args.points), "--out", str(path), "--quiet"])
            rows = read_rows(path)
            b = trend([float(r["b_star"]) for r in rows])
            x = trend([float(r["x_star"]) for r in rows])
            print(f"{path.name:<40s} exit {code}  b* {b:<13s} x* {x}")

    for kind in COMPARE:
        path = out / f"compare_{kind}.csv"
        code = cli(["compare", "--benchmark", kind, "--x-grid", "0,40,200", "--out", str(path), "--quiet"])
        diff = np.array([float(r["diff"]) for r in read_rows(path)])
        print(f"{path.name:<40s} exit {code}  U_prop - U_xl in [{diff.min():.4g}, {diff.max():.4g}]")


if __name__ == "__main__":
    main()
