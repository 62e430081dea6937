"""Amplification factor vs wavenumber for a few stabilization levels, as a text table.

    python3 scripts/vn_sweep.py [--dt-days 1]
"""
import argparse
import math

import numpy as np

from porostab.analysis import VonNeumannParams, amplification_factor
from porostab.materials import compute_tau


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dt-days", type=float, default=1.0)
    args = ap.parse_args()
    tau1 = compute_tau(3e9, 3e9, 1.0)
    taus = [0.0, tau1, 3 * tau1, 100 * tau1]
    base = VonNeumannParams(M_biot=math.inf, b=1.0, K_dr=5e9, k=1e-13, mu=1e-3, dx=0.05,
                            dt=args.dt_days * 86400.0, tau=0.0, theta=0.0)
    print("theta/pi  " + "  ".join(f"tau={t:9.3e}" for t in taus))
    for th in np.linspace(0, math.pi, 9):
        g = [amplification_factor(VonNeumannParams(**{**base.__dict__, "theta": th, "tau": t}))
             for t in taus]
        print(f"{th / math.pi:8.3f}  " + "  ".join(f"{v:13.6e}" for v in g))


if __name__ == "__main__":
    main()
