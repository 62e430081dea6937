"""Explicit fixed stress vs fully implicit on the drained cantilever: error and observed order.

    python3 scripts/convergence_study.py [--levels 5]
"""
import argparse

import numpy as np

from porostab.cases import DAY, build_cantilever
from porostab.steppers import SchemeConfig, run_simulation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=int, default=5)
    args = ap.parse_args()
    sc = build_cantilever(kappa=1e-13, K_f=2e9, K_s=40e9)
    prev = None
    for k in range(args.levels):
        dt = 0.2 * DAY / 2 ** k
        n = round(DAY / dt)
        a = run_simulation(sc, SchemeConfig(), [(dt, n)]).states[-1].p
        b = run_simulation(sc, SchemeConfig("fixed_stress"), [(dt, n)]).states[-1].p
        err = np.linalg.norm(b - a)
        order = "" if prev is None else f"  order {np.log2(prev / err):.3f}"
        print(f"dt={dt / DAY:8.5f} d  |p_FS - p_FIM| = {err:.4e}{order}")
        prev = err


if __name__ == "__main__":
    main()
