import csv
import json
from pathlib import Path

from vo_usage.files import atomic_write

from .result import SimResult

AUDIT_HEADER = ["tick", "job_id", "vo", "site", "decision", "reason", "EA", "BA", "C", "free"]
USAGE_HEADER = ["interval_start_s", "site", "vo", "cpu_seconds"]
JOBS_HEADER = ["job_id", "vo", "site", "submit", "assigned", "started", "completed", "rejections"]


def _fraction(value):
    return "" if value is None else f"{value:.9f}"


def _seconds(tick, step):
    return "" if tick is None else tick * step


def write_result(result: SimResult, out_dir) -> dict:
    """Write audit.csv, usage.csv, jobs.csv and metrics.json into `out_dir`."""
    out_dir = Path(out_dir)
    step = result.config.tick_step_s
    paths = {name: out_dir / name for name in ("audit.csv", "usage.csv", "jobs.csv", "metrics.json")}

    with atomic_write(paths["audit.csv"]) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(AUDIT_HEADER)
        for entry in result.audit:
            decision = entry.decision
            writer.writerow([
                entry.tick, entry.job_id, entry.vo, entry.site,
                decision.outcome.value, decision.reason.value if decision.reason else "",
                _fraction(entry.ea), _fraction(entry.ba), entry.c_i, entry.free,
            ])

    with atomic_write(paths["usage.csv"]) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(USAGE_HEADER)
        writer.writerows(result.usage_rows())

    with atomic_write(paths["jobs.csv"]) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(JOBS_HEADER)
        for record in result.records:
            writer.writerow([
                record.job_id, record.vo_id, record.assigned_site or "",
                record.spec.submit_time_s,
                _seconds(record.t_assigned, step),
                _seconds(record.t_started, step),
                _seconds(record.t_completed, step),
                record.rejection_count,
            ])

    with atomic_write(paths["metrics.json"]) as handle:
        json.dump(result.report.as_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")
    return paths
