"""Average CRB versus the number of sensing receive antennas (N_I=32, K=4, Q=3, N_T=8)."""

from _common import parser, report

from bdris_isac import ScenarioConfig
from bdris_isac.sweep import SweepSpec, run_sweep


def main():
    args = parser(__doc__).parse_args()
    cfg = ScenarioConfig(n_tx=8, n_targets=3)
    spec = SweepSpec("n_sensor", (4, 6, 8, 10, 12), tuple(range(args.seeds)), ("fully",))
    report(run_sweep(cfg, spec, workers=args.workers), args.out, "N_S")


if __name__ == "__main__":
    main()
