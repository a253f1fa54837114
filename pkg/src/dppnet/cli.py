"""Command line entry point: ``dppnet {simulate,sweep,ood,mobility,verify}``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path


from dppnet.config import ScenarioConfig, load_config, parse_seeds
from dppnet.harness import (
    emit_outputs,
    mobility_experiment,
    ood_experiment,
    queue_ratio,
    run_episode,
    run_sweep,
)

log = logging.getLogger("dppnet")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seeds:
        cfg = dataclasses.replace(cfg, seeds=parse_seeds(args.seeds))
    return cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    seed = cfg.seeds[0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = out / "trace.npz" if args.trace else None
    metrics = run_episode(cfg, seed, trace_path=trace)
    (out / "episode.csv").write_text(metrics.to_csv())
    print(f"seed {seed}: queue ratio {queue_ratio(metrics):.4f}, "
          f"mean penalty {metrics.penalty.mean():.4f}")
    return 0


def _finish(result, out) -> int:
    emit_outputs(result, out)
    failed = [r for r in result.rows if r.error]
    for r in failed:
        log.warning("failed run: %s", r.error)
    print(f"{len(result.rows)} runs ({len(failed)} failed) written to {out}")
    return 0


def cmd_sweep(args) -> int:
    return _finish(run_sweep(_config(args), args.parallelism), args.out)


def cmd_ood(args) -> int:
    cands = _floats(args.sp_weights) if args.sp_weights else None
    result = ood_experiment(_config(args), args.train_rate, _floats(args.test_rates),
                            sp_weight_candidates=cands, parallelism=args.parallelism)
    return _finish(result, args.out)


def cmd_mobility(args) -> int:
    result = mobility_experiment(_config(args), _floats(args.sigmas), args.parallelism)
    return _finish(result, args.out)


def cmd_verify(args) -> int:
    from dppnet.verify import run_oracle_suites

    ok = run_oracle_suites(n_instances=args.instances, seed=args.seed)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dppnet", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, parallel=True):
        p.add_argument("--config", help="YAML scenario file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seeds", help="seed count (e.g. 5) or list (e.g. 0,3,7)")
        if parallel:
            p.add_argument("--parallelism", type=int, default=1)

    p = sub.add_parser("simulate", help="run a single episode (first seed)")
    common(p, parallel=False)
    p.add_argument("--trace", action="store_true", help="dump per-step W and mu to trace.npz")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run every grid cell for every seed")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ood", help="tune at one arrival rate, evaluate at others")
    common(p)
    p.add_argument("--train-rate", type=float, default=0.25)
    p.add_argument("--test-rates", default="0.25,0.5,0.75,0.95")
    p.add_argument("--sp-weights", help="candidate shortest-path weights, comma separated")
    p.set_defaults(func=cmd_ood)

    p = sub.add_parser("mobility", help="sweep node mobility noise")
    common(p)
    p.add_argument("--sigmas", default="0,0.01,0.05")
    p.set_defaults(func=cmd_mobility)

    p = sub.add_parser("verify", help="run the exact-oracle checks")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
