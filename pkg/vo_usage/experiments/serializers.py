"""
Validation of the JSON experiment configuration.

Every section is checked and all problems are reported together; a
config that fails validation never produces a partial SimConfig.
"""
from pathlib import Path

from django.conf import settings
from rest_framework import serializers

from assignment.utils import StrategyKind
from policy.exceptions import PolicyError
from policy.utils import PolicyKind, PolicySet, parse_policy_file, parse_statement
from simulation.utils import GenerationSpec, PlannerMode, SimConfig, SiteSpec
from workload.exceptions import WorkloadFormatError
from workload.utils import WorkloadRow, read_workload

SYNC_CHOICES = ["on", "off"]


def _default(key):
    return lambda: settings.VOSIM[key]


class SiteSerializer(serializers.Serializer):
    id = serializers.CharField(max_length=64)
    cpus = serializers.IntegerField(min_value=1)
    staging_delay_s = serializers.IntegerField(min_value=0, default=0)
    total_allocation = serializers.FloatField(min_value=0.0, max_value=1.0, default=1.0)

    def validate_total_allocation(self, value):
        if value <= 0:
            raise serializers.ValidationError("must be positive")
        return value


class PoliciesSerializer(serializers.Serializer):
    statements = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    file = serializers.CharField(required=False)

    def validate(self, attrs):
        base_dir = self.context.get("base_dir", Path("."))
        parsed, errors = [], []
        for index, text in enumerate(attrs.get("statements", [])):
            try:
                parsed.append(parse_statement(text))
            except PolicyError as exc:
                errors.append(f"statement {index + 1}: {exc}")
        if attrs.get("file"):
            path = Path(base_dir) / attrs["file"]
            try:
                parsed.extend(parse_policy_file(path.read_text(encoding="utf-8")))
            except OSError as exc:
                errors.append(f"cannot read policy file {path}: {exc.strerror or exc}")
            except PolicyError as exc:
                errors.append(f"{path}: {exc}")
        if errors:
            raise serializers.ValidationError(errors)
        try:
            attrs["policy_set"] = PolicySet(parsed)
        except PolicyError as exc:
            raise serializers.ValidationError([str(exc)])
        return attrs


class WorkloadRowSerializer(serializers.Serializer):
    vo = serializers.IntegerField(min_value=0)
    workload = serializers.IntegerField(min_value=0)
    jobs = serializers.IntegerField(min_value=1)
    mean_duration_s = serializers.IntegerField(min_value=1)


class WorkloadsSerializer(serializers.Serializer):
    file = serializers.CharField(required=False)
    scale = serializers.FloatField(required=False, default=1.0)
    seed = serializers.IntegerField(required=False, min_value=0, allow_null=True, default=None)
    vo_count = serializers.IntegerField(required=False, min_value=1, default=6)
    mean_interarrival_s = serializers.FloatField(required=False, min_value=0.0, default=5.0)
    interarrival_stddev_s = serializers.FloatField(required=False, min_value=0.0, allow_null=True, default=None)
    burst_count = serializers.IntegerField(required=False, min_value=1, default=4)
    burst_offsets_s = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False,
                                            allow_empty=False)
    swap_distributions = serializers.BooleanField(required=False, default=False)
    unsync_max_shift_s = serializers.IntegerField(required=False, min_value=0, default=450)
    rows = WorkloadRowSerializer(many=True, required=False)

    def validate_scale(self, value):
        if value <= 0:
            raise serializers.ValidationError("must be positive")
        return value

    def validate_burst_offsets_s(self, value):
        if any(b < a for a, b in zip(value, value[1:])):
            raise serializers.ValidationError("offsets must be non-decreasing")
        return value

    def validate(self, attrs):
        if attrs.get("file"):
            path = Path(self.context.get("base_dir", Path("."))) / attrs["file"]
            try:
                attrs["jobs"] = tuple(read_workload(path))
            except FileNotFoundError:
                raise serializers.ValidationError({"file": [f"workload file not found: {path}"]})
            except OSError as exc:
                raise serializers.ValidationError({"file": [f"cannot read {path}: {exc.strerror or exc}"]})
            except WorkloadFormatError as exc:
                raise serializers.ValidationError({"file": [f"{path}: {exc}"]})
        return attrs


class SimulationSerializer(serializers.Serializer):
    policy = serializers.ChoiceField(choices=PolicyKind.choices, default=PolicyKind.NO_LIMIT)
    strategy = serializers.ChoiceField(choices=StrategyKind.choices, default=StrategyKind.RANDOM)
    sync = serializers.ChoiceField(choices=SYNC_CHOICES, default="on")
    seed = serializers.IntegerField(min_value=0, default=0)
    tick_step_s = serializers.IntegerField(min_value=1, default=_default("TICK_STEP_S"))
    horizon_s = serializers.IntegerField(min_value=1, default=_default("HORIZON_S"))
    measurement_interval_s = serializers.IntegerField(min_value=1, default=_default("MEASUREMENT_INTERVAL_S"))
    planner_mode = serializers.ChoiceField(choices=PlannerMode.choices, default=PlannerMode.EVERY_JOB)
    least_used_includes_queued = serializers.BooleanField(default=False)
    record_audit = serializers.BooleanField(default=True)


class ExperimentConfigSerializer(serializers.Serializer):
    sites = SiteSerializer(many=True, allow_empty=False)
    policies = PoliciesSerializer(required=False)
    workloads = WorkloadsSerializer()
    simulation = SimulationSerializer(required=False)

    def to_config(self) -> SimConfig:
        data = self.validated_data
        policies = data.get("policies") or {}
        workloads = data["workloads"]
        simulation = data.get("simulation") or SimulationSerializer(data={}).run_validation({})

        generation = None
        if "jobs" not in workloads:
            rows = workloads.get("rows")
            generation = GenerationSpec(
                scale=workloads["scale"],
                seed=workloads["seed"],
                vo_count=workloads["vo_count"],
                mean_interarrival_s=workloads["mean_interarrival_s"],
                interarrival_stddev_s=workloads["interarrival_stddev_s"],
                burst_count=workloads["burst_count"],
                burst_offsets_s=tuple(workloads["burst_offsets_s"]) if workloads.get("burst_offsets_s") else None,
                swap_distributions=workloads["swap_distributions"],
                unsync_max_shift_s=workloads["unsync_max_shift_s"],
                **({"rows": tuple(
                    WorkloadRow(r["vo"], r["workload"], r["jobs"], r["mean_duration_s"]) for r in rows
                )} if rows else {}),
            )

        return SimConfig(
            sites=tuple(
                SiteSpec(site["id"], site["cpus"], site["staging_delay_s"], site["total_allocation"])
                for site in data["sites"]
            ),
            policy_kind=PolicyKind(simulation["policy"]),
            policies=policies.get("policy_set", PolicySet()),
            strategy=StrategyKind(simulation["strategy"]),
            jobs=workloads.get("jobs"),
            generation=generation,
            sync=simulation["sync"] == "on",
            seed=simulation["seed"],
            tick_step_s=simulation["tick_step_s"],
            horizon_s=simulation["horizon_s"],
            measurement_interval_s=simulation["measurement_interval_s"],
            planner_mode=PlannerMode(simulation["planner_mode"]),
            least_used_includes_queued=simulation["least_used_includes_queued"],
            record_audit=simulation["record_audit"],
        )
