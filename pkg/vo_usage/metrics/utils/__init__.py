from .report import MetricsReport, average_reports, build_report, compute_art, compute_aru
from .summary import (
    HOLE,
    PUBLISHED_TABLES,
    POLICY_ORDER,
    STRATEGY_ORDER,
    SummaryTable,
    all_cells,
    published_value,
    render_summary,
    summarize,
    summary_header,
    summary_rows,
)

__all__ = [
    "HOLE",
    "MetricsReport",
    "PUBLISHED_TABLES",
    "POLICY_ORDER",
    "STRATEGY_ORDER",
    "SummaryTable",
    "all_cells",
    "average_reports",
    "build_report",
    "compute_art",
    "compute_aru",
    "published_value",
    "render_summary",
    "summarize",
    "summary_header",
    "summary_rows",
]
