"""Episode loop, parameter sweeps, aggregation and output files."""
from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from dppnet.backlog import BacklogState
from dppnet.config import ScenarioConfig
from dppnet.network import Topology, channel_gains, generate_geometric_network, perturb_positions
from dppnet.queues import (
    EpisodeMetrics,
    queue_ratio,
    sample_arrivals,
    stability_slope,
    step_queues,
)
from dppnet.scheduling import StepResult, dpp_step

CONSERVATION_TOL = 1e-9

AGG_COLUMNS = ["scenario_id", "backlog", "scheduler", "allocator", "lambda0", "V", "eta", "sigma",
               "queue_ratio_mean", "queue_ratio_stderr", "penalty_mean", "penalty_stderr",
               "slope_mean", "n_seeds"]
RUN_COLUMNS = ["scenario_id", "backlog", "scheduler", "allocator", "lambda0", "V", "eta", "sigma",
               "seed", "queue_ratio", "mean_penalty", "stability_slope", "runtime", "error"]
KEY_FIELDS = ["scenario_id", "backlog", "scheduler", "allocator", "lambda0", "V", "eta", "sigma"]
NUMERIC_KEYS = {"lambda0", "V", "eta", "sigma"}


class EpisodeError(RuntimeError):
    pass


class EpisodeTimeout(EpisodeError):
    pass


class ConservationError(EpisodeError):
    pass


def _streams(seed: int):
    net, arrivals, mobility = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(net), np.random.default_rng(arrivals),
            np.random.default_rng(mobility))


def build_network(config: ScenarioConfig, seed: int) -> Topology:
    """The network an episode with this seed runs on."""
    rng, _, _ = _streams(seed)
    return generate_geometric_network(config.n_min, config.n_max, config.commodity_fraction,
                                      config.radius, rng)


def run_episode(config: ScenarioConfig, seed: int, *, topology: Topology | None = None,
                initial_queue: np.ndarray | None = None,
                observer: Callable[[int, Topology, np.ndarray, np.ndarray, StepResult], None] | None = None,
                trace_path: str | Path | None = None) -> EpisodeMetrics:
    """Simulate ``config.t_max`` slots; deterministic in (config, seed).

    ``observer(t, topology, Q, A, step)`` is called after each slot's
    schedule is computed. With ``trace_path`` the per-step weights and
    realized schedules are saved to a compressed ``.npz``.
    """
    _, arr_rng, mob_rng = _streams(seed)
    if topology is None:
        topology = build_network(config, seed)
    channel = channel_gains(topology, config.noise)
    control = config.control()
    backlog = BacklogState(config.backlog, topology, sp_weight=config.sp_weight,
                           bound=config.B, warm_start=config.sp_warm_start)
    Q = np.zeros((topology.n, topology.m)) if initial_queue is None else np.array(initial_queue, float)
    T = config.t_max
    totals, arrivals, delivered, penalties = (np.zeros(T) for _ in range(4))
    trace = {"W": [], "mu": []} if trace_path is not None else None
    start = time.monotonic()
    for t in range(T):
        try:
            step = dpp_step(Q, topology, channel, backlog, control)
            A = sample_arrivals(config.lambda0, topology, arr_rng)
            if observer is not None:
                observer(t, topology, Q, A, step)
            Q_next, delivered[t] = step_queues(Q, step.mu, A, topology)
        except EpisodeError:
            raise
        except Exception as exc:
            raise EpisodeError(f"seed {seed}, step {t}: {exc}") from exc
        arrivals[t] = A.sum()
        penalties[t] = step.penalty
        if config.check_conservation:
            gap = Q_next.sum() - Q.sum() - arrivals[t] + delivered[t]
            if abs(gap) > CONSERVATION_TOL * max(1.0, Q.sum()):
                raise ConservationError(f"seed {seed}, step {t}: mass imbalance {gap:.3e}")
        Q = Q_next
        totals[t] = Q.sum()
        if trace is not None:
            trace["W"].append(step.W)
            trace["mu"].append(step.mu)
        if config.sigma > 0:
            topology = perturb_positions(topology, config.sigma, mob_rng)
            channel = channel_gains(topology, config.noise)
            backlog.reset(topology)
        if time.monotonic() - start > config.episode_budget:
            raise EpisodeTimeout(f"seed {seed}: exceeded {config.episode_budget}s at step {t}")
    if trace is not None:
        np.savez_compressed(trace_path, W=np.stack(trace["W"]), mu=np.stack(trace["mu"]))
    return EpisodeMetrics(totals, arrivals, delivered, penalties)


@dataclass
class RunRow:
    scenario_id: str
    backlog: str
    scheduler: str
    allocator: str
    lambda0: float
    V: float
    eta: float
    sigma: float
    seed: int
    queue_ratio: float
    mean_penalty: float
    stability_slope: float
    runtime: float
    error: str = ""

    @property
    def key(self) -> tuple:
        return tuple(getattr(self, k) for k in KEY_FIELDS)


@dataclass
class AggregateRow:
    scenario_id: str
    backlog: str
    scheduler: str
    allocator: str
    lambda0: float
    V: float
    eta: float
    sigma: float
    queue_ratio_mean: float
    queue_ratio_stderr: float
    penalty_mean: float
    penalty_stderr: float
    slope_mean: float
    n_seeds: int


def _mean_se(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), se


@dataclass
class SweepResult:
    rows: list[RunRow]

    def aggregate(self) -> list[AggregateRow]:
        groups: dict[tuple, list[RunRow]] = {}
        for row in self.rows:
            groups.setdefault(row.key, [])
            if not row.error:
                groups[row.key].append(row)
        out = []
        for key, rows in groups.items():
            qr = _mean_se([r.queue_ratio for r in rows])
            pen = _mean_se([r.mean_penalty for r in rows])
            slope = _mean_se([r.stability_slope for r in rows])[0]
            out.append(AggregateRow(*key, *qr, *pen, slope, len(rows)))
        return out

    def select(self, **match) -> list[RunRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]


def _cell_row(cell: ScenarioConfig, seed: int) -> RunRow:
    start = time.perf_counter()
    kw = dict(scenario_id=cell.scenario_id, backlog=cell.backlog, scheduler=cell.scheduler,
              allocator=cell.allocator, lambda0=float(cell.lambda0), V=float(cell.V),
              eta=float(cell.eta), sigma=float(cell.sigma), seed=seed)
    try:
        metrics = run_episode(cell, seed)
    except EpisodeError as exc:
        return RunRow(**kw, queue_ratio=math.nan, mean_penalty=math.nan, stability_slope=math.nan,
                      runtime=time.perf_counter() - start, error=str(exc))
    window = max(2, min(cell.slope_window, cell.t_max))
    slope = stability_slope(metrics, window) if cell.t_max >= 2 else 0.0
    return RunRow(**kw, queue_ratio=queue_ratio(metrics), mean_penalty=float(metrics.penalty.mean()),
                  stability_slope=slope, runtime=time.perf_counter() - start)


def _run_task(task):
    return _cell_row(*task)


def run_sweep(config: ScenarioConfig, parallelism: int = 1) -> SweepResult:
    """Every grid cell times every seed; rows are ordered by (cell, seed), never by completion."""
    tasks = [(cell, seed) for cell in config.cells() for seed in config.seeds]
    if parallelism <= 1:
        rows = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(_run_task, tasks))
    return SweepResult(rows)


def ood_experiment(config: ScenarioConfig, train_rate: float, test_rates, *,
                   sp_weight_candidates=None, parallelism: int = 1) -> SweepResult:
    """Fix controller settings at ``train_rate``, then evaluate them at ``test_rates``.

    The only rate-dependent setting of the classical controllers is the
    shortest-path weight; when candidates are given, the one with the lowest
    mean queue ratio at the training rate is kept.
    """
    test_rates = tuple(test_rates)
    if not test_rates:
        raise ValueError("test_rates must not be empty")
    if sp_weight_candidates:
        scores = {}
        for w in sp_weight_candidates:
            trial = dataclasses.replace(config, sp_weight=float(w), lambda0=train_rate, lambda_grid=None)
            agg = run_sweep(trial, parallelism).aggregate()
            scores[float(w)] = float(np.mean([a.queue_ratio_mean for a in agg]))
        best = min(scores, key=lambda w: (scores[w], w))
        config = dataclasses.replace(config, sp_weight=best)
    return run_sweep(dataclasses.replace(config, lambda_grid=test_rates), parallelism)


def mobility_experiment(config: ScenarioConfig, sigma_grid, parallelism: int = 1) -> SweepResult:
    sigma_grid = tuple(sigma_grid)
    if not sigma_grid:
        raise ValueError("sigma_grid must not be empty")
    return run_sweep(dataclasses.replace(config, sigma_grid=sigma_grid), parallelism)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def aggregates_to_csv(rows: list[AggregateRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGG_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, c)) for c in AGG_COLUMNS])
    return buf.getvalue()


def aggregates_from_csv(text: str) -> list[AggregateRow]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        vals = {}
        for f in dataclasses.fields(AggregateRow):
            raw = rec[f.name]
            vals[f.name] = int(raw) if f.name == "n_seeds" else (
                float(raw) if f.type in ("float", float) else raw)
        out.append(AggregateRow(**vals))
    return out


def runs_to_csv(rows: list[RunRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUN_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, c)) for c in RUN_COLUMNS])
    return buf.getvalue()


def _swept_axes(agg: list[AggregateRow]) -> list[str]:
    return [k for k in ("lambda0", "V", "sigma", "eta") if len({getattr(a, k) for a in agg}) > 1]


def _plot(agg: list[AggregateRow], x: str, metric: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "dppnet"
    series: dict[tuple, list[AggregateRow]] = {}
    for a in agg:
        label = tuple((k, getattr(a, k)) for k in KEY_FIELDS if k != x)
        series.setdefault(label, []).append(a)
    fig, ax = plt.subplots(figsize=(6, 4))
    varying = [k for k in KEY_FIELDS if k != x and len({getattr(a, k) for a in agg}) > 1]
    for label, pts in series.items():
        pts = sorted(pts, key=lambda a: getattr(a, x))
        name = ", ".join(f"{k}={v}" for k, v in label if k in varying) or metric
        ax.errorbar([getattr(a, x) for a in pts], [getattr(a, f"{metric}_mean") for a in pts],
                    yerr=[getattr(a, f"{metric}_stderr") for a in pts], marker="o", capsize=3,
                    label=name)
    ax.set_xlabel(x)
    ax.set_ylabel(metric.replace("_", " "))
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_outputs(result: SweepResult, out_dir: str | Path) -> list[Path]:
    """Write sweep.csv, runs.csv and one SVG per swept variable and metric."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        agg = result.aggregate()
        written = [out / "sweep.csv", out / "runs.csv"]
        written[0].write_text(aggregates_to_csv(agg))
        written[1].write_text(runs_to_csv(result.rows))
        if agg:
            axes = _swept_axes(agg) or ["lambda0"]
            for x in axes:
                for metric in ("queue_ratio", "penalty"):
                    if metric == "penalty" and all(a.penalty_mean == 0 for a in agg):
                        continue
                    path = out / f"{metric}_vs_{x}.svg"
                    _plot(agg, x, metric, path)
                    written.append(path)
    except OSError as exc:
        raise OSError(f"writing outputs to {out}: {exc}") from exc
    return written
