import tempfile
from pathlib import Path
from statistics import fmean

from django.test import SimpleTestCase

from .exceptions import WorkloadFormatError
from .utils import (
    HEADER,
    JobSpec,
    SyncMode,
    WorkloadSpec,
    build_grid3_workloads,
    even_burst_offsets,
    generate_workload,
    grid3_workload_specs,
    read_workload,
    workload_counts,
    write_workload,
)


def single_spec(**changes):
    options = dict(
        vo_id="VO0", workload_id="W0", job_count=80, mean_duration_s=200,
        mean_interarrival_s=5.0, interarrival_stddev_s=1.25, burst_offsets_s=(0, 900, 1800, 2700),
    )
    options.update(changes)
    return WorkloadSpec(**options)


class GeneratorTests(SimpleTestCase):
    def test_reference_counts(self):
        """Each VO carries the two workloads of its template row"""
        counts = workload_counts(build_grid3_workloads(scale=1.0, seed=3))
        self.assertEqual(counts, {"VO0": 180, "VO1": 260, "VO2": 180, "VO3": 260, "VO4": 180, "VO5": 260})
        self.assertEqual(counts["VO0"] + counts["VO1"], 440)

    def test_scaled_counts(self):
        cases = [
            (0.1, {"VO0": 18, "VO1": 26}),
            (0.5, {"VO0": 90, "VO1": 130}),
            (0.001, {"VO0": 2, "VO1": 2}),
        ]
        for scale, expected in cases:
            with self.subTest(scale=scale):
                counts = workload_counts(build_grid3_workloads(scale=scale, seed=0, vo_count=2))
                self.assertEqual(counts, expected)

    def test_scale_must_be_positive(self):
        with self.assertRaises(ValueError):
            grid3_workload_specs(scale=0)

    def test_specs_follow_template_rows(self):
        specs = grid3_workload_specs(vo_count=3)
        self.assertEqual(
            [(s.vo_id, s.workload_id, s.job_count, s.mean_duration_s) for s in specs],
            [("VO0", "W0", 80, 200), ("VO0", "W1", 100, 300), ("VO1", "W0", 120, 150),
             ("VO1", "W1", 140, 250), ("VO2", "W0", 80, 200), ("VO2", "W1", 100, 300)],
        )
        self.assertEqual(specs[0].burst_offsets_s, (0, 900, 1800, 2700))
        self.assertEqual(specs[0].interarrival_stddev_s, 1.25)

    def test_even_burst_offsets(self):
        self.assertEqual(even_burst_offsets(3600, 4), (0, 900, 1800, 2700))
        self.assertEqual(even_burst_offsets(60, 1), (0,))

    def test_deterministic(self):
        first = generate_workload(single_spec(), SyncMode.on(), seed=42)
        second = generate_workload(single_spec(), SyncMode.on(), seed=42)
        self.assertEqual(first, second)
        self.assertNotEqual(first, generate_workload(single_spec(), SyncMode.on(), seed=43))

    def test_single_job_lands_on_first_burst(self):
        jobs = generate_workload(single_spec(job_count=1, burst_offsets_s=(120, 900)), SyncMode.on(), seed=1)
        self.assertEqual(len(jobs), 1)
        self.assertEqual(jobs[0].submit_time_s, 120)
        self.assertEqual(jobs[0].job_id, "VO0-W0-0000")

    def test_bursts_split_jobs_evenly(self):
        jobs = generate_workload(single_spec(job_count=10), SyncMode.on(), seed=5)
        per_burst = [sum(1 for job in jobs if start <= job.submit_time_s < start + 900) for start in (0, 900, 1800, 2700)]
        self.assertEqual(per_burst, [3, 3, 2, 2])

    def test_jobs_are_valid_and_sorted(self):
        jobs = build_grid3_workloads(scale=1.0, seed=9)
        self.assertEqual(jobs, sorted(jobs, key=lambda job: (job.submit_time_s, job.job_id)))
        self.assertEqual(len({job.job_id for job in jobs}), len(jobs))
        for job in jobs:
            self.assertGreaterEqual(job.duration_s, 1)
            self.assertGreaterEqual(job.submit_time_s, 0)
            self.assertEqual(job.group_id, job.workload_id)

    def test_mean_duration(self):
        cases = [False, True]
        for swap in cases:
            with self.subTest(swap_distributions=swap):
                spec = single_spec(job_count=10000, burst_offsets_s=(0,), swap_distributions=swap)
                durations = [job.duration_s for job in generate_workload(spec, SyncMode.on(), seed=17)]
                self.assertEqual(len(durations), 10000)
                self.assertLess(abs(fmean(durations) - 200) / 200, 0.05)

    def test_unsynchronized_shift_is_per_vo(self):
        sync = SyncMode.off(offset_seed=4)
        jobs = build_grid3_workloads(scale=1.0, seed=2, sync=sync)
        shifts = sync.shifts_for(["VO0", "VO1", "VO2", "VO3", "VO4", "VO5"])
        for vo in ("VO0", "VO1", "VO2", "VO3", "VO4", "VO5"):
            with self.subTest(vo=vo):
                shift = shifts[vo]
                self.assertTrue(0 <= shift <= 450)
                first = {job.workload_id: job.submit_time_s for job in reversed(jobs) if job.vo_id == vo}
                self.assertEqual(first, {"W0": shift, "W1": shift})
        self.assertEqual(sync.shift_for("VO3"), SyncMode.off(offset_seed=4).shift_for("VO3"))

    def test_unsynchronized_shifts_differ(self):
        for offset_seed in range(2000):
            with self.subTest(offset_seed=offset_seed):
                shifts = SyncMode.off(offset_seed=offset_seed).shifts_for(["VO0", "VO1"])
                self.assertNotEqual(shifts["VO0"], shifts["VO1"])
        six = [f"VO{i}" for i in range(6)]
        for offset_seed in range(200):
            with self.subTest(offset_seed=offset_seed, vos=6):
                self.assertEqual(len(set(SyncMode.off(offset_seed=offset_seed).shifts_for(six).values())), 6)

    def test_shifts_fill_a_narrow_range(self):
        self.assertEqual(sorted(SyncMode.off(offset_seed=3, max_shift_s=1).shifts_for(["VO0", "VO1"]).values()), [0, 1])
        self.assertEqual(SyncMode.off(max_shift_s=0).shifts_for(["VO0", "VO1"]), {"VO0": 0, "VO1": 0})
        self.assertEqual(SyncMode.on().shifts_for(["VO1", "VO0"]), {"VO0": 0, "VO1": 0})

    def test_first_vo_keeps_its_own_draw(self):
        for offset_seed in range(20):
            sync = SyncMode.off(offset_seed=offset_seed)
            self.assertEqual(sync.shifts_for(["VO1", "VO0"])["VO0"], sync.shift_for("VO0"))

    def test_synchronized_bursts_share_start(self):
        jobs = build_grid3_workloads(scale=1.0, seed=2, sync=SyncMode.on())
        starts = {job.vo_id: job.submit_time_s for job in reversed(jobs)}
        self.assertEqual(set(starts.values()), {0})

    def test_swapped_distributions(self):
        jobs = generate_workload(single_spec(swap_distributions=True), SyncMode.on(), seed=8)
        self.assertEqual(len(jobs), 80)
        self.assertTrue(all(job.duration_s >= 1 for job in jobs))

    def test_group_and_cpus(self):
        jobs = generate_workload(single_spec(group_id="analysis", cpus_required=2, job_count=4), SyncMode.on(), 0)
        self.assertEqual({(job.group_id, job.cpus_required) for job in jobs}, {("analysis", 2)})

    def test_invalid_specs(self):
        for changes in ({"job_count": 0}, {"burst_offsets_s": ()}, {"burst_offsets_s": (900, 0)}):
            with self.subTest(changes=changes):
                with self.assertRaises(ValueError):
                    single_spec(**changes)


class WorkloadFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / "workload.csv"

    def test_write_then_read(self):
        jobs = build_grid3_workloads(scale=0.1, seed=1)
        write_workload(jobs, self.path)
        self.assertEqual(read_workload(self.path), jobs)
        self.assertTrue(self.path.read_text(encoding="utf-8").startswith(",".join(HEADER) + "\n"))
        self.assertEqual([p.name for p in Path(self.tmp.name).iterdir()], ["workload.csv"])

    def test_header_only(self):
        self.path.write_text(",".join(HEADER) + "\n", encoding="utf-8")
        self.assertEqual(read_workload(self.path), [])

    def test_bad_rows_name_the_line(self):
        good = "VO0-W0-0000,VO0,W0,W0,0,10,1"
        cases = [
            (good + "\nVO0-W0-0001,VO0,W0,W0,5,-3,1", 3),
            (good + "\nVO0-W0-0001,VO0,W0,W0,five,3,1", 3),
            ("VO0-W0-0001,VO0,W0,W0,5,3", 2),
            ("VO0-W0-0001,VO0,W0,W0,5,3,0", 2),
        ]
        for body, line in cases:
            with self.subTest(body=body):
                self.path.write_text(",".join(HEADER) + "\n" + body + "\n", encoding="utf-8")
                with self.assertRaises(WorkloadFormatError) as caught:
                    read_workload(self.path)
                self.assertEqual(caught.exception.line, line)
                self.assertIn(f"line {line}", str(caught.exception))

    def test_wrong_header(self):
        self.path.write_text("id,vo\n", encoding="utf-8")
        with self.assertRaises(WorkloadFormatError):
            read_workload(self.path)

    def test_job_spec_invariants(self):
        with self.assertRaises(ValueError):
            JobSpec("x", "VO0", "W0", "W0", submit_time_s=-1, duration_s=5)
