from .admission import (
    AdmissionDecision,
    Assessment,
    Outcome,
    RejectReason,
    SiteView,
    admit,
    admit_commitment,
    admit_extensible,
    admit_fixed,
    assess,
)
from .ledger import UsageLedger
from .statements import (
    EPSILON,
    LimitTuple,
    OversubscriptionWarning,
    PolicyKind,
    PolicySet,
    ResourceKind,
    UsagePolicyStatement,
    check_oversubscription,
    format_policy_file,
    format_statement,
    parse_policy_file,
    parse_statement,
)

__all__ = [
    "AdmissionDecision",
    "Assessment",
    "EPSILON",
    "LimitTuple",
    "Outcome",
    "OversubscriptionWarning",
    "PolicyKind",
    "PolicySet",
    "RejectReason",
    "ResourceKind",
    "SiteView",
    "UsageLedger",
    "UsagePolicyStatement",
    "admit",
    "admit_commitment",
    "admit_extensible",
    "admit_fixed",
    "assess",
    "check_oversubscription",
    "format_policy_file",
    "format_statement",
    "parse_policy_file",
    "parse_statement",
]
