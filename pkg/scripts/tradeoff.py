"""Rate/CRB trade-off region: rho sweep for Q = 1, 2, 3 targets (N_I=32, K=4)."""

from dataclasses import replace

from _common import parser, report

from bdris_isac import ScenarioConfig
from bdris_isac.sweep import SweepSpec, run_sweep


def main():
    args = parser(__doc__).parse_args()
    rhos = tuple(round(0.1 * i, 1) for i in range(1, 10))
    for q in (1, 2, 3):
        print(f"\nQ = {q}")
        cfg = ScenarioConfig(n_targets=q)
        rows = run_sweep(cfg, SweepSpec("rho", rhos, tuple(range(args.seeds)), ("fully",)), workers=args.workers)
        out = args.out and args.out.replace(".csv", f"_q{q}.csv")
        report(rows, out, "rho")


if __name__ == "__main__":
    main()
