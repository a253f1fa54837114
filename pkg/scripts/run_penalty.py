"""Sweep the penalty weight V for the consumption and efficiency penalties.

    python scripts/run_penalty.py --out results/penalty
"""
from pathlib import Path

from _common import base_config, finish, parser

from dppnet.harness import run_sweep


def main():
    p = parser(__doc__)
    p.add_argument("--V", default="0,1,10,100")
    args = p.parse_args()
    V_grid = tuple(float(v) for v in args.V.split(","))
    for kind in ("cons", "eff"):
        cfg = base_config(args, penalty=kind, V_grid=V_grid, allocator="gradient",
                          scenario_id=f"penalty_{kind}")
        finish(run_sweep(cfg, args.parallelism), Path(args.out) / kind)


if __name__ == "__main__":
    main()
