import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

from django.template.loader import render_to_string

from assignment.utils import StrategyKind
from policy.utils import PolicyKind

from ..exceptions import SummaryError
from .report import MetricsReport

logger = logging.getLogger(__name__)

STRATEGY_ORDER = (StrategyKind.RANDOM, StrategyKind.ROUND_ROBIN, StrategyKind.LEAST_USED)
POLICY_ORDER = (PolicyKind.NO_LIMIT, PolicyKind.FIXED, PolicyKind.EXTENSIBLE, PolicyKind.COMMITMENT)
HOLE = "--"
SUMMARY_HEADER = ["sync", "strategy", "policy", "aru", "art_s", "completed", "incomplete"]

Cell = Tuple[StrategyKind, PolicyKind]

# Published simulation results, rows in STRATEGY_ORDER, columns in POLICY_ORDER.
PUBLISHED_TABLES = {
    ("aru", "on"): ((0.72, 0.75, 0.69, 0.78), (0.70, 0.65, 0.75, 0.77), (0.69, 0.80, 0.81, 0.79)),
    ("art", "on"): ((10.64, 19.25, 12.83, 15.83), (11.09, 19.39, 11.32, 15.52), (13.25, 15.14, 15.06, 16.02)),
    ("aru", "off"): ((0.70, 0.67, 0.70, 0.69), (0.69, 0.65, 0.71, 0.65), (0.69, 0.64, 0.72, 0.64)),
    ("art", "off"): ((10.3, 12.59, 10.64, 13.35), (7.78, 14.82, 9.34, 12.35), (10.57, 13.68, 11.37, 12.59)),
}

METRIC_TITLES = {"aru": "ARU", "art": "ART"}


def published_value(metric: str, sync: str, strategy: StrategyKind, policy: PolicyKind) -> float:
    rows = PUBLISHED_TABLES[(metric, sync)]
    return rows[STRATEGY_ORDER.index(strategy)][POLICY_ORDER.index(policy)]


def all_cells() -> List[Cell]:
    return [(strategy, policy) for strategy in STRATEGY_ORDER for policy in POLICY_ORDER]


def _label(cell: Cell) -> str:
    return f"{cell[0].label}/{cell[1].label}"


def _fmt(value: Optional[float]) -> str:
    return HOLE if value is None else f"{value:.2f}"


@dataclass(frozen=True)
class SummaryTable:
    """One metric for one sync mode, laid out strategies x policies."""

    metric: str  # "aru" or "art"
    sync: str  # "on" or "off"
    cells: Dict[Cell, Optional[float]]
    compare_published: bool = False

    @property
    def title(self) -> str:
        mode = "synchronized" if self.sync == "on" else "un-synchronized"
        return f"{METRIC_TITLES[self.metric]}, {mode}"

    def header(self) -> List[str]:
        columns = ["Policy/UP"] + [policy.label for policy in POLICY_ORDER]
        if self.compare_published:
            columns += [f"{policy.label} (published)" for policy in POLICY_ORDER]
        return columns

    def rows(self) -> List[List[str]]:
        rows = []
        for strategy in STRATEGY_ORDER:
            row = [strategy.label] + [_fmt(self.cells.get((strategy, policy))) for policy in POLICY_ORDER]
            if self.compare_published:
                row += [_fmt(published_value(self.metric, self.sync, strategy, policy)) for policy in POLICY_ORDER]
            rows.append(row)
        return rows

    def missing(self) -> List[str]:
        return [_label(cell) for cell in all_cells() if self.cells.get(cell) is None]


def summarize(results: Mapping[Cell, MetricsReport], sync: str,
              compare_published: bool = False) -> Tuple[SummaryTable, SummaryTable]:
    """ARU and ART tables for one sync mode. Missing cells show as holes."""
    if not results:
        raise SummaryError([_label(cell) for cell in all_cells()])
    aru = {cell: results[cell].aru for cell in all_cells() if cell in results}
    art = {cell: results[cell].art_overall for cell in all_cells() if cell in results}
    tables = (
        SummaryTable("aru", sync, aru, compare_published),
        SummaryTable("art", sync, art, compare_published),
    )
    holes = tables[0].missing()
    if holes:
        logger.warning("Summary for sync=%s is missing %d cells: %s", sync, len(holes), ", ".join(holes))
    return tables


def summary_rows(results: Mapping[Cell, MetricsReport], sync: str, compare_published: bool = False):
    """Machine-readable rows: one per cell, holes included."""
    for strategy, policy in all_cells():
        report = results.get((strategy, policy))
        if report is None:
            row = [sync, strategy.value, policy.value, HOLE, HOLE, HOLE, HOLE]
        else:
            row = [
                sync, strategy.value, policy.value,
                f"{report.aru:.6f}",
                HOLE if report.art_overall is None else f"{report.art_overall:.6f}",
                f"{report.completed_total:g}",
                f"{report.incomplete_count:g}",
            ]
        if compare_published:
            row += [
                f"{published_value('aru', sync, strategy, policy):.2f}",
                f"{published_value('art', sync, strategy, policy):.2f}",
            ]
        yield row


def summary_header(compare_published: bool = False) -> List[str]:
    return SUMMARY_HEADER + (["published_aru", "published_art_s"] if compare_published else [])


def render_summary(table: SummaryTable) -> str:
    """Plain-text rendering for the terminal."""
    grid = [table.header()] + table.rows()
    widths = [max(len(row[i]) for row in grid) for i in range(len(grid[0]))]

    def line(row):
        return "  ".join(
            cell.ljust(width) if i == 0 else cell.rjust(width) for i, (cell, width) in enumerate(zip(row, widths))
        ).rstrip()

    return render_to_string("metrics/summary.txt", {
        "title": table.title,
        "header": line(grid[0]),
        "rule": "-" * len(line(grid[0])),
        "lines": [line(row) for row in grid[1:]],
    })
