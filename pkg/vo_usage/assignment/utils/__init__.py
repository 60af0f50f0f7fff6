from .strategies import (
    AssignmentState,
    Candidate,
    StrategyKind,
    admissible_sites,
    assess_sites,
    select_site,
)

__all__ = [
    "AssignmentState",
    "Candidate",
    "StrategyKind",
    "admissible_sites",
    "assess_sites",
    "select_site",
]
