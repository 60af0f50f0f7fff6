import csv
from pathlib import Path
from typing import Iterable, List

from vo_usage.files import atomic_write

from ..exceptions import WorkloadFormatError
from .generator import JobSpec

HEADER = ["job_id", "vo", "group", "workload", "submit_s", "duration_s", "cpus"]


def write_workload(jobs: Iterable[JobSpec], path) -> Path:
    path = Path(path)
    with atomic_write(path) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(HEADER)
        for job in jobs:
            writer.writerow([
                job.job_id, job.vo_id, job.group_id, job.workload_id,
                job.submit_time_s, job.duration_s, job.cpus_required,
            ])
    return path


def _integer(value: str, column: str, line: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise WorkloadFormatError(f"{column} is not an integer: {value!r}", line=line) from None


def read_workload(path) -> List[JobSpec]:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise WorkloadFormatError("missing header", line=1)
        if [name.strip() for name in header] != HEADER:
            raise WorkloadFormatError(f"expected header {','.join(HEADER)}", line=1)

        jobs = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(HEADER):
                raise WorkloadFormatError(f"expected {len(HEADER)} columns, found {len(row)}", line=line)
            job_id, vo, group, workload, submit, duration, cpus = (cell.strip() for cell in row)
            try:
                jobs.append(JobSpec(
                    job_id=job_id,
                    vo_id=vo,
                    group_id=group,
                    workload_id=workload,
                    submit_time_s=_integer(submit, "submit_s", line),
                    duration_s=_integer(duration, "duration_s", line),
                    cpus_required=_integer(cpus, "cpus", line),
                ))
            except ValueError as exc:
                raise WorkloadFormatError(str(exc), line=line) from None
    return jobs
