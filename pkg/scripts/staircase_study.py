"""Barrier index and channel error for the staircase at several time steps.

    python3 scripts/staircase_study.py [--out DIR]
"""
import argparse
from pathlib import Path

import numpy as np

from porostab.cases import CHANNEL, MONTH, YEAR, build_staircase
from porostab.io import write_csv
from porostab.materials import StabilizationConfig
from porostab.steppers import SchemeConfig, run_simulation

T_END = 30 * YEAR


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="porostab_out/studies")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sc = build_staircase()
    chan = sc.mesh.region_of_cell == CHANNEL
    ref = run_simulation(sc, SchemeConfig(), [(MONTH, round(T_END / MONTH))])
    p_ref = ref.states[-1].p
    rows = [["fully_implicit", 0, MONTH, ref.diagnostics[-1].oscillation_index_masked, 0.0]]
    for stab in (False, True):
        cfg = SchemeConfig("fixed_stress", stabilization=StabilizationConfig(stab, 1.0))
        for dt in (MONTH, YEAR, 5 * YEAR):
            traj = run_simulation(sc, cfg, [(dt, round(T_END / dt))])
            err = np.linalg.norm(traj.states[-1].p[chan] - p_ref[chan])
            rows.append(["fixed_stress", int(stab), dt, traj.diagnostics[-1].oscillation_index_masked,
                         err])
    for r in rows:
        print(f"{r[0]:15s} stab={r[1]} dt={r[2] / YEAR:7.4f} y  barrier index {r[3]:.4f}  "
              f"channel |p - p_FIM| {r[4]:.3e} Pa")
    path = write_csv(rows, ["scheme", "stab", "dt_s", "barrier_index", "channel_error_pa"],
                     out / "staircase_study.csv")
    print(f"-> {path}")


if __name__ == "__main__":
    main()
