"""Tune the shortest-path weight at one load, then test at other loads.

    python scripts/run_ood.py --out results/ood --train-rate 0.25
"""
from _common import base_config, finish, parser

from dppnet.harness import ood_experiment


def main():
    p = parser(__doc__)
    p.add_argument("--train-rate", type=float, default=0.25)
    p.add_argument("--test-rates", default="0.25,0.5,0.75,0.95")
    p.add_argument("--sp-weights", default="0.5,1,2,5")
    p.add_argument("--backlog", default="sp")
    args = p.parse_args()
    cfg = base_config(args, backlog=args.backlog)
    res = ood_experiment(cfg, args.train_rate, [float(x) for x in args.test_rates.split(",")],
                         sp_weight_candidates=[float(x) for x in args.sp_weights.split(",")],
                         parallelism=args.parallelism)
    finish(res, args.out)


if __name__ == "__main__":
    main()
