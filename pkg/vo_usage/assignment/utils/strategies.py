"""
Task-assignment strategies, restricted to sites that would admit the job now.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np
from django.db import models

from policy.utils import Assessment, PolicyKind, PolicySet, UsageLedger, assess


class StrategyKind(models.TextChoices):
    RANDOM = "random", "Random"
    ROUND_ROBIN = "round-robin", "Round Robin"
    LEAST_USED = "least-used", "Least Used"

    @classmethod
    def parse(cls, text: str) -> "StrategyKind":
        """Accept the flag value or the table label, ignoring case, spaces and underscores."""
        key = text.strip().lower().replace("_", "-").replace(" ", "-")
        for kind in cls:
            if key in (kind.value, kind.label.lower().replace(" ", "-")):
                return kind
        raise ValueError(f"unknown strategy {text!r}; expected one of {', '.join(cls.values)}")


@dataclass(frozen=True)
class Candidate:
    index: int  # declaration order of the site
    site: object
    assessment: Assessment

    @property
    def decision(self):
        return self.assessment.decision


@dataclass
class AssignmentState:
    """Strategy state owned by the planners: one seeded generator and a round-robin cursor per VO."""

    site_count: int
    seed: int = 0
    cursors: Dict[str, int] = field(default_factory=dict)
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.site_count < 1:
            raise ValueError("at least one site is required")
        self.rng = np.random.default_rng(self.seed)


def assess_sites(job, sites: Sequence, kind: PolicyKind, policies: PolicySet, ledger: UsageLedger,
                 now_tick: int) -> List[Candidate]:
    """Assessment of every site able to hold the job at all, in declaration order."""
    return [
        Candidate(index, site, assess(kind, policies, ledger, site, job.vo_id, job.cpus_required, now_tick))
        for index, site in enumerate(sites)
        if job.cpus_required <= site.cpu_count
    ]


def admissible_sites(job, sites: Sequence, kind: PolicyKind, policies: PolicySet, ledger: UsageLedger,
                     now_tick: int) -> List[Candidate]:
    return [c for c in assess_sites(job, sites, kind, policies, ledger, now_tick) if c.decision.admitted]


def _load(site, include_queued: bool) -> Fraction:
    busy = site.running_cpus()
    if include_queued:
        busy += site.waiting_cpus()
    return Fraction(busy, site.cpu_count)


def select_site(strategy: StrategyKind, state: AssignmentState, candidates: Sequence[Candidate], vo: str,
                include_queued: bool = False) -> Optional[Candidate]:
    if not candidates:
        return None
    if strategy == StrategyKind.RANDOM:
        # a fresh draw on every attempt, retries included
        return candidates[int(state.rng.integers(len(candidates)))]
    if strategy == StrategyKind.ROUND_ROBIN:
        cursor = state.cursors.get(vo, 0)
        chosen = min(candidates, key=lambda c: (c.index - cursor) % state.site_count)
        state.cursors[vo] = (chosen.index + 1) % state.site_count
        return chosen
    if strategy == StrategyKind.LEAST_USED:
        return min(candidates, key=lambda c: (_load(c.site, include_queued), c.index))
    raise ValueError(f"unknown strategy {strategy!r}")
