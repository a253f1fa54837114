"""Drift-plus-penalty routing and power control with optimal-transport link scheduling."""

from dppnet.config import ScenarioConfig, load_config
from dppnet.harness import (
    SweepResult,
    emit_outputs,
    mobility_experiment,
    ood_experiment,
    run_episode,
    run_sweep,
)
from dppnet.network import Topology, channel_gains, generate_geometric_network, link_capacity
from dppnet.scheduling import ControlSpec, dpp_step

__all__ = [
    "ControlSpec",
    "ScenarioConfig",
    "SweepResult",
    "Topology",
    "channel_gains",
    "dpp_step",
    "emit_outputs",
    "generate_geometric_network",
    "link_capacity",
    "load_config",
    "mobility_experiment",
    "ood_experiment",
    "run_episode",
    "run_sweep",
]
