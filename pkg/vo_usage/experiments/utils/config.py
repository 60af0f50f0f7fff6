import hashlib
import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from simulation.exceptions import ConfigError
from simulation.utils import SimConfig

from ..serializers import ExperimentConfigSerializer

logger = logging.getLogger(__name__)


def _flatten(errors, prefix="") -> List[str]:
    """Turn DRF's nested error structure into 'sites[1].cpus: ...' lines."""
    if isinstance(errors, dict):
        lines = []
        for key, value in errors.items():
            name = prefix if key == "non_field_errors" else (f"{prefix}.{key}" if prefix else str(key))
            lines += _flatten(value, name)
        return lines
    if isinstance(errors, list):
        if all(isinstance(item, str) for item in errors):
            return [f"{prefix}: {item}" if prefix else str(item) for item in errors]
        lines = []
        for index, item in enumerate(errors):
            if item:
                lines += _flatten(item, f"{prefix}[{index}]")
        return lines
    return [f"{prefix}: {errors}" if prefix else str(errors)]


def config_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def read_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"])
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror or exc}"])
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"])
    if not isinstance(document, dict):
        raise ConfigError([f"{path}: the top level must be an object"])
    return document


def load_config(path, policy=None, strategy=None, sync: Optional[str] = None, seed: Optional[int] = None,
                horizon: Optional[int] = None, scale: Optional[float] = None) -> SimConfig:
    """
    Read, validate and build a SimConfig, then apply command-line overrides.

    Raises ConfigError listing every problem; nothing partial is returned.
    """
    path = Path(path)
    serializer = ExperimentConfigSerializer(data=read_document(path), context={"base_dir": path.parent})
    if not serializer.is_valid():
        raise ConfigError(_flatten(serializer.errors))
    config = serializer.to_config()

    if scale is not None:
        if config.generation is None:
            raise ConfigError(["--scale needs a workload generation block, not a workload file"])
        if scale <= 0:
            raise ConfigError(["--scale must be positive"])
        config = replace(config, generation=replace(config.generation, scale=scale))
    config = config.with_overrides(
        policy_kind=policy,
        strategy=strategy,
        sync=None if sync is None else sync == "on",
        seed=seed,
        horizon_s=horizon,
    )
    logger.debug("Loaded %s: %d sites, %d statements", path, len(config.sites), len(config.policies))
    return config.validate()
