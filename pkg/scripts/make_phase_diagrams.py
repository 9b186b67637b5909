"""Sweep the axial branches for several ambient dimensions and write one
phase-diagram CSV per n, plus a JSON summary of the fold points.

Usage:
    python scripts/make_phase_diagrams.py --out-dir results/phase
"""

import argparse
import json
import pathlib

import numpy as np

from onsager_ms.quadrature import SphereParams
from onsager_ms.sigma import find_eta_star, phase_diagram


def write_diagram(diagram, path):
    rows = ["k,reflected,eta,alpha,alpha_prime,stability"]
    for branch in diagram.branches:
        for sample, tag in zip(branch.samples, branch.tags):
            rows.append(
                f"{branch.k},{int(branch.reflected)},{sample.eta:.17g},"
                f"{sample.sigma:.17g},{sample.sigma_prime:.17g},{tag}"
            )
    path.write_text("\n".join(rows) + "\n")
    return len(rows) - 1


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-values", type=int, nargs="+", default=[3, 4, 5, 6])
    parser.add_argument("--eta-min", type=float, default=-10.0)
    parser.add_argument("--eta-max", type=float, default=30.0)
    parser.add_argument("--samples", type=int, default=401)
    parser.add_argument("--out-dir", type=pathlib.Path,
                        default=pathlib.Path("results/phase"))
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(args.eta_min, args.eta_max, args.samples)

    folds = {}
    for n in args.n_values:
        diagram = phase_diagram(n, eta_grid=grid)
        path = args.out_dir / f"phase_n{n}.csv"
        count = write_diagram(diagram, path)
        print(f"n={n}: wrote {count} samples to {path}")
        for k in range(1, n // 2 + 1):
            star = find_eta_star(SphereParams(n, k))
            folds[f"n={n},k={k}"] = {
                "eta_star": star.eta_star,
                "alpha_star": star.alpha_star,
            }
            print(f"  fold k={k}: eta* = {star.eta_star:.12g}, "
                  f"alpha* = {star.alpha_star:.12g}")

    summary = args.out_dir / "folds.json"
    summary.write_text(json.dumps(folds, indent=2, sort_keys=True) + "\n")
    print(f"fold summary in {summary}")


if __name__ == "__main__":
    main()
