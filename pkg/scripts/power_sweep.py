"""Sum rate and average CRB versus transmit power at desk scale (N_I=8, K=2, Q=2)."""

from _common import parser, report

from bdris_isac import ScenarioConfig
from bdris_isac.sweep import SweepSpec, run_sweep


def main():
    args = parser(__doc__).parse_args()
    cfg = ScenarioConfig(n_ris=8, n_users=2, n_targets=2)
    spec = SweepSpec("power_dbm", (0.0, 3.0, 6.0, 9.0, 12.0), tuple(range(args.seeds)), ("fully",))
    report(run_sweep(cfg, spec, workers=args.workers), args.out, "P[dBm]")


if __name__ == "__main__":
    main()
