"""Explicit fixed stress after the cantilever load is frozen: index vs extra steps.

    python3 scripts/freeze_study.py [--extra 200] [--out DIR]
"""
import argparse
from pathlib import Path

from porostab.cases import DAY, build_cantilever
from porostab.io import write_csv
from porostab.steppers import SchemeConfig, run_simulation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--extra", type=int, default=200, help="steps after the freeze")
    ap.add_argument("--out", default="porostab_out/studies")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sc = build_cantilever(freeze_time=100 * DAY)
    fim = run_simulation(sc, SchemeConfig(), [(DAY, 100 + args.extra)])
    fs = run_simulation(sc, SchemeConfig("fixed_stress"), [(DAY, 100 + args.extra)])
    rows = []
    for k in range(0, args.extra + 1):
        a, b = fim.diagnostics[100 + k], fs.diagnostics[100 + k]
        rows.append([k, b.oscillation_index_masked, a.oscillation_index_masked, b.divu_norm])
        if k in (1, 10, 30, 100, args.extra):
            print(f"after {k:4d} steps: FS index {b.oscillation_index_masked:.4f}  "
                  f"FIM index {a.oscillation_index_masked:.4f}")
    path = write_csv(rows, ["extra_steps", "index_fs", "index_fim", "divu_norm_fs"],
                     out / "freeze_study.csv")
    print(f"-> {path}")


if __name__ == "__main__":
    main()
