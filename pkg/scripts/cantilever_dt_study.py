"""Oscillation index of the cantilever pressure vs time step, with and without stabilization.

    python3 scripts/cantilever_dt_study.py [--out DIR] [--nx 20]
"""
import argparse
from pathlib import Path

import numpy as np

from porostab.cases import DAY, build_cantilever
from porostab.io import write_csv
from porostab.materials import StabilizationConfig
from porostab.steppers import SchemeConfig, run_simulation

DAYS = (1, 2, 3, 4, 6, 7, 8, 9)  # steps with nonzero load


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="porostab_out/studies")
    ap.add_argument("--nx", type=int, default=20)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sc = build_cantilever(nx=args.nx, nz=args.nx)
    rows = []
    for scheme in ("fully_implicit", "fixed_stress"):
        for stab in (False, True):
            cfg = SchemeConfig(scheme, stabilization=StabilizationConfig(stab, 1.0))
            for dt in (1.0, 0.1, 0.01):
                n = round(10 / dt)
                traj = run_simulation(sc, cfg, [(dt * DAY, n)])
                idx = [traj.diagnostics[round(d / dt)].oscillation_index_masked for d in DAYS]
                rows.append([scheme, int(stab), dt] + idx)
                print(f"{scheme:15s} stab={int(stab)} dt={dt:5g} d  "
                      + " ".join(f"{v:.3f}" for v in idx))
    cols = ["scheme", "stab", "dt_days"] + [f"index_day{d}" for d in DAYS]
    path = write_csv(rows, cols, out / "cantilever_dt_study.csv")
    print(f"-> {path}")
    fim = np.array(rows[0][3:])
    print(f"FIM 1 d index range {fim.min():.4f}..{fim.max():.4f}")


if __name__ == "__main__":
    main()
