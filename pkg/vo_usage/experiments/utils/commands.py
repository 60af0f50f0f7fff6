"""Argument and error plumbing shared by the management commands."""
import csv
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from assignment.utils import StrategyKind
from policy.utils import PolicyKind
from simulation.exceptions import ConfigError
from vo_usage.files import atomic_write

from .config import load_config

CONFIG_ERROR = 2
RUNTIME_ERROR = 3


def positive_int(text):
    value = int(text)
    if value < 1:
        raise ValueError(text)
    return value


def add_config_argument(parser):
    parser.add_argument(
        "--config", type=Path, default=None,
        help="Experiment config (JSON). Defaults to the bundled reference configuration.",
    )


def add_override_arguments(parser, cell=True):
    if cell:
        parser.add_argument("--policy", choices=PolicyKind.values, help="Usage policy kind")
        parser.add_argument("--strategy", type=StrategyKind.parse,
                            help=f"Assignment strategy: {' | '.join(StrategyKind.values)}")
        parser.add_argument("--seed", type=int, help="Simulation seed")
    parser.add_argument("--sync", choices=["on", "off"], help="Synchronized or un-synchronized workloads")
    parser.add_argument("--horizon", type=positive_int, help="Simulated seconds")
    parser.add_argument("--scale", type=float, help="Workload generation scale factor")


def config_path(options) -> Path:
    return Path(options.get("config") or settings.VOSIM["DEFAULT_CONFIG"])


def out_dir(options) -> Path:
    return Path(options.get("out") or settings.VOSIM["OUT_DIR"])


def config_failure(exc: ConfigError) -> CommandError:
    lines = "\n".join(f"  - {error}" for error in exc.errors)
    return CommandError(f"Invalid configuration ({len(exc.errors)} error(s)):\n{lines}", returncode=CONFIG_ERROR)


def runtime_failure(exc: Exception) -> CommandError:
    return CommandError(f"Simulation failed: {exc}", returncode=RUNTIME_ERROR)


def load_from_options(options, **fixed):
    """Load the config named by --config with the command-line overrides applied."""
    overrides = {
        "policy": PolicyKind(options["policy"]) if options.get("policy") else None,
        "strategy": options.get("strategy"),
        "sync": options.get("sync"),
        "seed": options.get("seed"),
        "horizon": options.get("horizon"),
        "scale": options.get("scale"),
    }
    overrides.update(fixed)
    try:
        return load_config(config_path(options), **overrides)
    except ConfigError as exc:
        raise config_failure(exc) from exc


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with atomic_write(path) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
