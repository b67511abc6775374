"""Recompute the derived columns of the bundled five-mode table and their Monte Carlo errors.

    python scripts/run_reference_table.py --samples 4000 --seed 0
"""

import argparse

from dyntunnel.inverse import Quantity, gamma_p_consistency, load_reference_table, propagate_given

COLUMNS = [("gamma_r_prime", 1e9), ("G", 1.0), ("g_bar", 1e10), ("alpha", 1.0), ("alpha_prime", 1.0), ("gamma_rG", 1e9)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rows, gamma_p = load_reference_table()
    print(f"{'mode':>4} " + " ".join(f"{name:>22}" for name, _ in COLUMNS))
    for row in rows:
        res = propagate_given(
            Quantity(*row.values["gamma_r"]), Quantity(*row.values["G"]), Quantity(gamma_p), args.samples, args.seed + row.mode
        )
        cells = []
        for name, unit in COLUMNS:
            if name == "gamma_r_prime":
                cells.append(f"{res.gamma_r_prime / unit:9.3g} ({row.values[name][0] / unit:.3g})")
                continue
            q = getattr(res, name)
            cells.append(f"{q.value / unit:.3g}+-{q.sigma / unit:.2g} ({row.values[name][0] / unit:.3g})")
        print(f"{row.mode:>4} " + " ".join(f"{c:>22}" for c in cells))

    cons = gamma_p_consistency([(r.values["g_bar"][0], r.values["gamma_rG"][0]) for r in rows])
    print("gamma_p from printed columns [1e12/s]:", " ".join(f"{v / 1e12:.3f}" for v in cons.values))
    print(f"relative spread {cons.spread:.4f}")


if __name__ == "__main__":
    main()
