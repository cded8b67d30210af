"""Metrics versus the number of BD-RIS elements for the three circuit topologies (K=4, Q=2).

All topologies at a given (N_I, seed) share the fully-connected normalizers,
so the objective column is comparable across topologies.
"""

from _common import parser, report

from bdris_isac import ScenarioConfig
from bdris_isac.sweep import SweepSpec, run_sweep


def main():
    args = parser(__doc__).parse_args()
    cfg = ScenarioConfig(n_groups=4)
    spec = SweepSpec("n_ris", (8, 16, 32), tuple(range(args.seeds)), ("fully", "group", "single"))
    report(run_sweep(cfg, spec, workers=args.workers), args.out, "N_I")


if __name__ == "__main__":
    main()
