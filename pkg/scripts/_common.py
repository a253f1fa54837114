import argparse
import dataclasses
import logging
from pathlib import Path

from dppnet.config import ScenarioConfig, load_config, parse_seeds
from dppnet.harness import emit_outputs


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", help="base YAML scenario (defaults to built-in values)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", help="seed count or comma-separated list")
    p.add_argument("--parallelism", type=int, default=1)
    return p


def base_config(args, **overrides) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seeds:
        overrides["seeds"] = parse_seeds(args.seeds)
    return dataclasses.replace(cfg, **overrides)


def finish(result, out) -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    for path in emit_outputs(result, Path(out)):
        logging.info("wrote %s", path)
