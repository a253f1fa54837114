"""Queue ratio as nodes drift by Gaussian steps each slot.

    python scripts/run_mobility.py --out results/mobility
"""
from _common import base_config, finish, parser

from dppnet.harness import mobility_experiment


def main():
    p = parser(__doc__)
    p.add_argument("--sigmas", default="0,0.005,0.01,0.02,0.05")
    args = p.parse_args()
    cfg = base_config(args, backlog_grid=("bp", "sp", "qsp"))
    res = mobility_experiment(cfg, [float(s) for s in args.sigmas.split(",")], args.parallelism)
    finish(res, args.out)


if __name__ == "__main__":
    main()
