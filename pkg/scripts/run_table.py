"""Average queue ratio for every backlog x scheduler pair over the load grid.

    python scripts/run_table.py --out results/table
"""
import numpy as np
from _common import base_config, finish, parser

from dppnet.harness import run_sweep

LAMBDAS = (0.1, 0.25, 0.5, 0.75, 0.95)


def main():
    p = parser(__doc__)
    p.add_argument("--etas", default="0.5,1.0")
    args = p.parse_args()
    cfg = base_config(args, lambda_grid=LAMBDAS, backlog_grid=("bp", "sp", "qsp"),
                      scheduler_grid=("softmax", "sinkhorn"),
                      eta_grid=tuple(float(e) for e in args.etas.split(",")))
    res = run_sweep(cfg, args.parallelism)
    finish(res, args.out)

    print(f"{'backlog':8s} {'scheduler':9s} {'eta':>4s}  queue ratio")
    for backlog in cfg.backlog_grid:
        for sched in cfg.scheduler_grid:
            for eta in cfg.eta_grid:
                per_seed = [np.mean([r.queue_ratio for r in res.select(backlog=backlog, scheduler=sched,
                                                                       eta=eta, seed=s)])
                            for s in cfg.seeds]
                se = np.std(per_seed, ddof=1) / np.sqrt(len(per_seed)) if len(per_seed) > 1 else 0.0
                print(f"{backlog:8s} {sched:9s} {eta:4.1f}  {np.mean(per_seed):.3f} +- {se:.3f}")


if __name__ == "__main__":
    main()
