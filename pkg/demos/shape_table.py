"""Mean RMSE of the EKF baseline and the VSA tracker on the three test shapes.

A short Monte Carlo run (10 trials by default) of the rhombus, circle and
star presets, printed as a small table.

    python demos/shape_table.py [--trials 10] [--jobs 1]
"""

import argparse

from vsaradar.config import load_config
from vsaradar.montecarlo import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    shapes = ("rhombus", "circle", "star")
    results = {}
    for shape in shapes:
        table = run_sweep(load_config(preset=f"table1-{shape}", trials=args.trials), jobs=args.jobs)
        results[shape] = {r.method: r for r in table.rows}

    print(f"{'':>10}" + "".join(f"{s:>18}" for s in shapes))
    for method, label in (("ekf_baseline", "EKF"), ("vsa", "VSA")):
        cells = "".join(f"{results[s][method].mean_rmse:>10.3f} ± {results[s][method].std_rmse:.3f}"
                        for s in shapes)
        print(f"{label:>10}{cells}")
    gain = 1 - results["star"]["vsa"].mean_rmse / results["star"]["ekf_baseline"].mean_rmse
    print(f"\nstar: VSA error {100 * gain:.0f}% below the EKF baseline")


if __name__ == "__main__":
    main()
