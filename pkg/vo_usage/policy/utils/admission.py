"""
Admission rules for the four usage-policy kinds.

Instantaneous quantities (C_i, J, C_free) are integer CPUs. Windowed
usage (EA_i, BA_i) and the limits are fractions of site capacity; J is
turned into a fraction only inside the commitment cases.
"""
from dataclasses import dataclass
from typing import Optional, Protocol

from django.db import models

from .ledger import UsageLedger
from .statements import EPSILON, PolicyKind, PolicySet, UsagePolicyStatement


class Outcome(models.TextChoices):
    RUN = "run", "Run"
    QUEUE = "queue", "Queue"
    REJECT = "reject", "Reject"


class RejectReason(models.TextChoices):
    EPOCH_EXCEEDED = "epoch-exceeded", "EpochExceeded"
    BURST_EXCEEDED = "burst-exceeded", "BurstExceeded"
    FIXED_LIMIT_EXCEEDED = "fixed-limit-exceeded", "FixedLimitExceeded"
    NO_CAPACITY = "no-capacity", "NoCapacity"
    FALLTHROUGH = "fallthrough", "Fallthrough"


@dataclass(frozen=True)
class AdmissionDecision:
    outcome: Outcome
    reason: Optional[RejectReason] = None

    def __post_init__(self):
        if (self.outcome == Outcome.REJECT) != (self.reason is not None):
            raise ValueError("a reject carries a reason and nothing else does")

    @classmethod
    def run(cls):
        return cls(Outcome.RUN)

    @classmethod
    def queue(cls):
        return cls(Outcome.QUEUE)

    @classmethod
    def reject(cls, reason: RejectReason):
        return cls(Outcome.REJECT, reason)

    @property
    def admitted(self) -> bool:
        return self.outcome != Outcome.REJECT

    def __str__(self):
        if self.reason is None:
            return self.outcome.label
        return f"{self.outcome.label}({self.reason.label})"


class SiteView(Protocol):
    """What admission reads from a site: capacity plus CPUs already sited per VO."""

    site_id: str
    cpu_count: int
    total_allocation: float

    def vo_cpus(self, vo: str) -> int: ...

    def allocated_cpus(self) -> int: ...


@dataclass(frozen=True)
class Assessment:
    """An admission decision with the quantities it was taken on, for the audit log."""

    decision: AdmissionDecision
    c_i: int
    free: int
    ea: Optional[float] = None
    ba: Optional[float] = None


def _fixed_condition(stmt: UsagePolicyStatement, site: SiteView, vo: str, j_cpus: int) -> bool:
    limit = stmt.share * site.cpu_count
    return site.vo_cpus(vo) + j_cpus <= limit + EPSILON


def admit_fixed(stmt: UsagePolicyStatement, site: SiteView, vo: str, j_cpus: int) -> AdmissionDecision:
    if _fixed_condition(stmt, site, vo, j_cpus):
        return AdmissionDecision.run()
    return AdmissionDecision.reject(RejectReason.FIXED_LIMIT_EXCEEDED)


def admit_extensible(stmt: UsagePolicyStatement, site: SiteView, vo: str, j_cpus: int) -> AdmissionDecision:
    # the limit only binds under contention
    free = site.cpu_count - site.allocated_cpus()
    if _fixed_condition(stmt, site, vo, j_cpus) or j_cpus <= free:
        return AdmissionDecision.run()
    return AdmissionDecision.reject(RejectReason.NO_CAPACITY)


def _commitment(stmt, policies, ledger, site, vo, j_cpus, now_tick):
    cpus = site.cpu_count
    ea = ledger.window_average(site.site_id, vo, stmt.epoch.interval_s, now_tick, cpus)
    ba = ledger.window_average(site.site_id, vo, stmt.burst.interval_s, now_tick, cpus)
    if ea > stmt.epoch.fraction:
        return AdmissionDecision.reject(RejectReason.EPOCH_EXCEEDED), ea, ba

    sigma = 0.0
    for peer in policies.vos_at(site.site_id):
        peer_stmt = policies.get(site.site_id, peer)
        sigma += ledger.window_average(site.site_id, peer, peer_stmt.burst.interval_s, now_tick, cpus)
    j = j_cpus / cpus
    total = site.total_allocation
    within_burst = ba + j < stmt.burst.fraction

    if sigma <= EPSILON and within_burst:
        decision = AdmissionDecision.run()
    elif sigma + j < total and within_burst:
        decision = AdmissionDecision.run()
    elif abs(sigma - total) <= EPSILON and ba + j < stmt.epoch.fraction:
        decision = AdmissionDecision.queue()
    else:
        decision = AdmissionDecision.reject(RejectReason.FALLTHROUGH)
    return decision, ea, ba


def admit_commitment(stmt, policies: PolicySet, ledger: UsageLedger, site: SiteView, vo: str,
                     j_cpus: int, now_tick: int) -> AdmissionDecision:
    """
    Cases in order: over-used (reject), un-allocated (run), sub-allocated
    (run), over-allocated (queue), otherwise reject. The burst sum runs over
    every VO holding a statement at the site.
    """
    return _commitment(stmt, policies, ledger, site, vo, j_cpus, now_tick)[0]


def assess(kind: PolicyKind, policies: PolicySet, ledger: UsageLedger, site: SiteView, vo: str,
           j_cpus: int, now_tick: int) -> Assessment:
    if j_cpus < 1:
        raise ValueError("a job needs at least one CPU")
    c_i = site.vo_cpus(vo)
    free = site.cpu_count - site.allocated_cpus()
    if kind == PolicyKind.NO_LIMIT:
        return Assessment(AdmissionDecision.run(), c_i, free)

    stmt = policies.get(site.site_id, vo)
    if stmt is None:
        # VOs without a statement have no entitlement at the site
        return Assessment(AdmissionDecision.reject(RejectReason.FALLTHROUGH), c_i, free)
    if kind == PolicyKind.FIXED:
        return Assessment(admit_fixed(stmt, site, vo, j_cpus), c_i, free)
    if kind == PolicyKind.EXTENSIBLE:
        return Assessment(admit_extensible(stmt, site, vo, j_cpus), c_i, free)
    decision, ea, ba = _commitment(stmt, policies, ledger, site, vo, j_cpus, now_tick)
    return Assessment(decision, c_i, free, ea=ea, ba=ba)


def admit(kind: PolicyKind, policies: PolicySet, ledger: UsageLedger, site: SiteView, vo: str,
          j_cpus: int, now_tick: int) -> AdmissionDecision:
    """Decide admission without touching the ledger or the site."""
    return assess(kind, policies, ledger, site, vo, j_cpus, now_tick).decision
