"""
Usage-policy statements in bracket notation.

    [CPU, Site1, VO0, (1hour, 10%), (1minute, 40%)]

The first tuple is the epoch limit, the second the burst limit. Fixed and
extensible policies read only the epoch fraction.
"""
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from django.db import models

from ..exceptions import (
    FractionOutOfRange,
    PolicyError,
    PolicySyntaxError,
    UnknownDurationUnit,
    UnknownResourceKind,
)

EPSILON = 1e-9

# Largest first; the formatter renders each duration in the largest exact unit.
DURATION_UNITS = (
    ("month", 30 * 86400),
    ("week", 7 * 86400),
    ("day", 86400),
    ("hour", 3600),
    ("minute", 60),
    ("second", 1),
)
_UNIT_SECONDS = dict(DURATION_UNITS)


class ResourceKind(models.TextChoices):
    CPU = "CPU", "CPU"


class PolicyKind(models.TextChoices):
    NO_LIMIT = "no-limit", "No-limit"
    FIXED = "fixed", "Fix-limit"
    EXTENSIBLE = "extensible", "Ext-limit"
    COMMITMENT = "commitment", "Cm-limit"


@dataclass(frozen=True)
class LimitTuple:
    interval_s: int
    fraction: float


@dataclass(frozen=True)
class UsagePolicyStatement:
    resource_kind: ResourceKind
    site_id: str
    vo_id: str
    epoch: LimitTuple
    burst: LimitTuple

    @property
    def share(self) -> float:
        """R_i for fixed and extensible policies."""
        return self.epoch.fraction


_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>\d+(?:\.\d*)?|\.\d+)"
    r"|(?P<word>[A-Za-z_][A-Za-z0-9_.\-]*)"
    r"|(?P<punct>[\[\](),%])"
    r")"
)


class _Scanner:
    """Tokenizer with one-token lookahead; every token keeps its column."""

    def __init__(self, text: str):
        self.text = text
        self.tokens: List[Tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            match = _TOKEN_RE.match(text, pos)
            if not match or match.end() == pos:
                bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
                raise PolicySyntaxError(f"unexpected character {text[bad]!r}", position=bad)
            kind = match.lastgroup
            self.tokens.append((kind, match.group(kind), match.start(kind)))
            pos = match.end()
        self.index = 0

    def _end_position(self):
        return len(self.text.rstrip())

    def peek(self):
        if self.index < len(self.tokens):
            return self.tokens[self.index]
        return ("end", "", self._end_position())

    def take(self, kind, value=None, what=None):
        tok_kind, tok_value, position = self.peek()
        if tok_kind != kind or (value is not None and tok_value != value):
            expected = what or (repr(value) if value is not None else kind)
            found = "end of statement" if tok_kind == "end" else repr(tok_value)
            raise PolicySyntaxError(f"expected {expected}, found {found}", position=position)
        self.index += 1
        return tok_value, position

    def finish(self):
        tok_kind, tok_value, position = self.peek()
        if tok_kind != "end":
            raise PolicySyntaxError(f"unexpected trailing {tok_value!r}", position=position)


def _parse_duration(scanner: _Scanner) -> int:
    amount, position = scanner.take("number", what="duration amount")
    if not amount.isdigit():
        raise PolicySyntaxError("duration amount must be an integer", position=position)
    unit, unit_position = scanner.take("word", what="duration unit")
    name = unit.lower()
    if name.endswith("s") and name[:-1] in _UNIT_SECONDS:
        name = name[:-1]
    if name not in _UNIT_SECONDS:
        raise UnknownDurationUnit(f"unknown duration unit {unit!r}", position=unit_position)
    seconds = int(amount) * _UNIT_SECONDS[name]
    if seconds <= 0:
        raise PolicySyntaxError("interval must be positive", position=position)
    return seconds


def _parse_tuple(scanner: _Scanner) -> LimitTuple:
    scanner.take("punct", "(")
    interval_s = _parse_duration(scanner)
    scanner.take("punct", ",")
    percent, position = scanner.take("number", what="percentage")
    scanner.take("punct", "%")
    scanner.take("punct", ")")
    value = Decimal(percent)
    if not 0 <= value <= 100:
        raise FractionOutOfRange(f"fraction {percent}% outside [0, 100]%", position=position)
    # moving the decimal point keeps the parse correctly rounded
    return LimitTuple(interval_s=interval_s, fraction=float(value.scaleb(-2)))


def parse_statement(text: str) -> UsagePolicyStatement:
    """Parse one bracket-notation statement. Errors carry the 0-based column."""
    scanner = _Scanner(text)
    scanner.take("punct", "[")
    kind, kind_position = scanner.take("word", what="resource kind")
    if kind.upper() not in ResourceKind.values:
        raise UnknownResourceKind(f"unknown resource kind {kind!r}", position=kind_position)
    scanner.take("punct", ",")
    site_id, _ = scanner.take("word", what="site identifier")
    scanner.take("punct", ",")
    vo_id, _ = scanner.take("word", what="VO identifier")
    scanner.take("punct", ",")
    epoch = _parse_tuple(scanner)
    scanner.take("punct", ",")
    burst_position = scanner.peek()[2]
    burst = _parse_tuple(scanner)
    scanner.take("punct", "]")
    scanner.finish()
    if burst.interval_s > epoch.interval_s:
        raise PolicySyntaxError("burst interval longer than epoch interval", position=burst_position)
    return UsagePolicyStatement(
        resource_kind=ResourceKind(kind.upper()),
        site_id=site_id,
        vo_id=vo_id,
        epoch=epoch,
        burst=burst,
    )


def _format_duration(seconds: int) -> str:
    for name, size in DURATION_UNITS:
        if seconds % size == 0:
            amount = seconds // size
            return f"{amount}{name}{'' if amount == 1 else 's'}"
    raise AssertionError("seconds always divides")


def _format_percent(fraction: float) -> str:
    # repr is the shortest decimal naming this float; shifting it two places is exact
    return format(Decimal(repr(fraction)).scaleb(2), "f")


def _format_tuple(limit: LimitTuple) -> str:
    return f"({_format_duration(limit.interval_s)}, {_format_percent(limit.fraction)}%)"


def format_statement(stmt: UsagePolicyStatement) -> str:
    return (
        f"[{stmt.resource_kind.value}, {stmt.site_id}, {stmt.vo_id}, "
        f"{_format_tuple(stmt.epoch)}, {_format_tuple(stmt.burst)}]"
    )


def parse_policy_file(text: str) -> List[UsagePolicyStatement]:
    """One statement per line; `#` starts a comment, blank lines are skipped."""
    statements = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        try:
            statements.append(parse_statement(line))
        except PolicyError as exc:
            raise exc.at_line(number) from None
    return statements


def format_policy_file(statements: Iterable[UsagePolicyStatement]) -> str:
    return "".join(f"{format_statement(stmt)}\n" for stmt in statements)


class PolicySet:
    """Statements indexed by (site, VO)."""

    def __init__(self, statements: Iterable[UsagePolicyStatement] = ()):
        self._by_key: Dict[Tuple[str, str], UsagePolicyStatement] = {}
        self._by_site: Dict[str, List[str]] = {}
        for stmt in statements:
            key = (stmt.site_id, stmt.vo_id)
            if key in self._by_key:
                raise PolicyError(f"duplicate statement for site {stmt.site_id}, VO {stmt.vo_id}")
            self._by_key[key] = stmt
            self._by_site.setdefault(stmt.site_id, []).append(stmt.vo_id)

    def __iter__(self):
        return iter(self._by_key.values())

    def __len__(self):
        return len(self._by_key)

    def __eq__(self, other):
        return isinstance(other, PolicySet) and self._by_key == other._by_key

    def get(self, site_id: str, vo_id: str) -> Optional[UsagePolicyStatement]:
        return self._by_key.get((site_id, vo_id))

    def vos_at(self, site_id: str) -> Sequence[str]:
        return tuple(self._by_site.get(site_id, ()))

    def max_interval_s(self) -> int:
        return max((s.epoch.interval_s for s in self), default=0)


@dataclass(frozen=True)
class OversubscriptionWarning:
    site_id: str
    limit: str  # "epoch" or "burst"
    total: float

    @property
    def informational(self) -> bool:
        return self.limit == "burst"

    def __str__(self):
        label = "burst shares (informational)" if self.informational else "epoch shares"
        return f"{self.site_id}: {label} sum to {self.total * 100:.1f}% > 100%"


def check_oversubscription(statements, sites) -> List[OversubscriptionWarning]:
    """Flag sites whose epoch fractions (and, informationally, burst fractions) sum above 1."""
    epoch_totals: Dict[str, float] = {}
    burst_totals: Dict[str, float] = {}
    for stmt in statements:
        epoch_totals[stmt.site_id] = epoch_totals.get(stmt.site_id, 0.0) + stmt.epoch.fraction
        burst_totals[stmt.site_id] = burst_totals.get(stmt.site_id, 0.0) + stmt.burst.fraction

    site_order = [site.site_id for site in sites]
    site_order += sorted(set(epoch_totals) - set(site_order))
    warnings = []
    for site_id in site_order:
        if epoch_totals.get(site_id, 0.0) > 1.0 + EPSILON:
            warnings.append(OversubscriptionWarning(site_id, "epoch", epoch_totals[site_id]))
        if burst_totals.get(site_id, 0.0) > 1.0 + EPSILON:
            warnings.append(OversubscriptionWarning(site_id, "burst", burst_totals[site_id]))
    return warnings
