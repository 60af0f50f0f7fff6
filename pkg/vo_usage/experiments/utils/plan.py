"""
The experiment grid: strategies x policies x sync modes x seeds.

Cells run in a process pool and never touch Django settings or the
database; results come back in plan order whatever the completion order.
"""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from assignment.utils import StrategyKind
from metrics.utils import POLICY_ORDER, STRATEGY_ORDER, MetricsReport, average_reports
from policy.utils import PolicyKind
from simulation.exceptions import ConfigError
from simulation.utils import SimConfig, run, write_result

from ..exceptions import CellError

logger = logging.getLogger(__name__)

SYNC_ORDER = ("on", "off")


@dataclass(frozen=True)
class Cell:
    sync: str
    strategy: StrategyKind
    policy: PolicyKind
    seed: int

    @property
    def label(self) -> str:
        return f"sync={self.sync} {self.strategy.value}/{self.policy.value} seed={self.seed}"

    @property
    def trace_dir(self) -> str:
        return f"sync-{self.sync}/seed-{self.seed}/{self.strategy.value}-{self.policy.value}"


@dataclass(frozen=True)
class ExperimentPlan:
    base: SimConfig
    strategies: Tuple[StrategyKind, ...] = STRATEGY_ORDER
    policies: Tuple[PolicyKind, ...] = POLICY_ORDER
    syncs: Tuple[str, ...] = SYNC_ORDER
    seeds: Tuple[int, ...] = (0,)

    def __post_init__(self):
        problems = []
        for name in ("strategies", "policies", "syncs", "seeds"):
            if not getattr(self, name):
                problems.append(f"sweep: {name} must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            problems.append("sweep: seeds must be distinct")
        if any(sync not in SYNC_ORDER for sync in self.syncs):
            problems.append("sweep: sync modes are 'on' and 'off'")
        if problems:
            raise ConfigError(problems)

    def cells(self) -> List[Cell]:
        return [
            Cell(sync, strategy, policy, seed)
            for sync in self.syncs
            for seed in self.seeds
            for strategy in self.strategies
            for policy in self.policies
        ]

    def config_for(self, cell: Cell, record_audit: bool = False) -> SimConfig:
        return replace(
            self.base,
            sync=cell.sync == "on",
            strategy=cell.strategy,
            policy_kind=cell.policy,
            seed=cell.seed,
            record_audit=record_audit,
        )


def parse_seed_range(text: str) -> Tuple[int, ...]:
    """'1..10' -> (1, ..., 10); a bare number is a single seed; commas list seeds."""
    text = text.strip()
    if ".." in text:
        low, high = text.split("..", 1)
        low, high = int(low), int(high)
        if high < low:
            raise ValueError(f"empty seed range {text}")
        return tuple(range(low, high + 1))
    return tuple(int(part) for part in text.split(",") if part.strip())


def seed_label(seeds: Sequence[int]) -> str:
    if len(seeds) == 1:
        return f"Seed {seeds[0]}"
    ordered = sorted(seeds)
    if ordered == list(range(ordered[0], ordered[-1] + 1)):
        return f"Seeds {ordered[0]}..{ordered[-1]}"
    return "Seeds " + ", ".join(str(seed) for seed in ordered)


def run_cell(config: SimConfig, trace_dir: Optional[str] = None) -> MetricsReport:
    result = run(config)
    if trace_dir is not None:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)
        write_result(result, trace_dir)
    return result.report


def execute(plan: ExperimentPlan, jobs: Optional[int] = None,
            trace_root: Optional[Path] = None) -> Dict[Cell, MetricsReport]:
    """Run every cell; the first failure aborts the sweep with a CellError."""
    cells = plan.cells()
    keep_traces = trace_root is not None
    tasks = [
        (cell, plan.config_for(cell, record_audit=keep_traces),
         str(Path(trace_root) / cell.trace_dir) if keep_traces else None)
        for cell in cells
    ]
    jobs = jobs or os.cpu_count() or 1
    logger.info("Sweeping %d cells with %d worker(s)", len(cells), jobs)

    reports: Dict[Cell, MetricsReport] = {}
    if jobs == 1:
        for cell, config, trace_dir in tasks:
            try:
                reports[cell] = run_cell(config, trace_dir)
            except Exception as exc:
                raise CellError(cell, exc) from exc
            logger.info("Finished %s", cell.label)
        return reports

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [(cell, pool.submit(run_cell, config, trace_dir)) for cell, config, trace_dir in tasks]
        for cell, future in futures:
            try:
                reports[cell] = future.result()
            except Exception as exc:
                for _, pending in futures:
                    pending.cancel()
                raise CellError(cell, exc) from exc
            logger.info("Finished %s", cell.label)
    return reports


def per_seed(reports: Dict[Cell, MetricsReport], sync: str, seed: int):
    return {
        (cell.strategy, cell.policy): report
        for cell, report in reports.items()
        if cell.sync == sync and cell.seed == seed
    }


def averaged(reports: Dict[Cell, MetricsReport], sync: str, seeds: Sequence[int]):
    grouped: Dict[tuple, List[MetricsReport]] = {}
    for cell, report in reports.items():
        if cell.sync == sync and cell.seed in seeds:
            grouped.setdefault((cell.strategy, cell.policy), []).append(report)
    return {key: average_reports(group) for key, group in grouped.items()}
