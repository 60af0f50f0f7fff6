from bisect import bisect_left
from typing import Dict, List, Mapping, Tuple

from ..exceptions import LedgerError


_COMPACT_AFTER = 4096


class _Series:
    """Samples for one (site, VO): parallel tick and prefix-sum lists with a moving head."""

    __slots__ = ("ticks", "cum_before", "total", "head")

    def __init__(self):
        self.ticks: List[int] = []
        self.cum_before: List[int] = []
        self.total = 0
        self.head = 0

    def last_tick(self):
        return self.ticks[-1] if len(self.ticks) > self.head else None

    def append(self, tick: int, cpus: int):
        self.ticks.append(tick)
        self.cum_before.append(self.total)
        self.total += cpus

    def evict_before(self, tick: int):
        self.head = max(self.head, bisect_left(self.ticks, tick, self.head))
        if self.head >= _COMPACT_AFTER and self.head * 2 >= len(self.ticks):
            del self.ticks[: self.head]
            del self.cum_before[: self.head]
            self.head = 0

    def _prefix(self, index: int) -> int:
        return self.cum_before[index] if index < len(self.ticks) else self.total

    def sum_between(self, lo_tick: int, hi_tick: int) -> int:
        """Sum of cpus over samples with lo_tick <= tick < hi_tick."""
        lo = bisect_left(self.ticks, lo_tick, self.head)
        hi = bisect_left(self.ticks, hi_tick, self.head)
        if hi <= lo:
            return 0
        return self._prefix(hi) - self._prefix(lo)


class UsageLedger:
    """
    Per-(site, VO) series of CPUs in use, one sample per tick.

    Usage is kept in integer CPU-tick units and divided once per query, so a
    constant signal averages exactly and an idle window is exactly zero.
    Ticks without a sample, including those before the first one, count as
    zero usage.
    """

    def __init__(self, site_cpus: Mapping[str, int], tick_step_s: int = 1, retention_s: int = 3600):
        if tick_step_s <= 0:
            raise LedgerError("tick step must be positive")
        self.site_cpus = dict(site_cpus)
        self.tick_step_s = tick_step_s
        self.retention_s = max(retention_s, tick_step_s)
        self._retention_ticks = -(-self.retention_s // tick_step_s)
        self._series: Dict[Tuple[str, str], _Series] = {}
        self._memo: Dict[Tuple[str, str, int, int, int], float] = {}

    def record_tick(self, site: str, vo: str, cpus: int, tick: int) -> "UsageLedger":
        capacity = self.site_cpus.get(site)
        if capacity is None:
            raise LedgerError(f"unknown site {site!r}")
        if cpus < 0 or cpus > capacity:
            raise LedgerError(f"{cpus} CPUs in use for {vo} at {site} outside [0, {capacity}]")
        series = self._series.get((site, vo))
        if series is None:
            series = self._series[(site, vo)] = _Series()
        last = series.last_tick()
        if last is not None and tick <= last:
            raise LedgerError(f"tick {tick} not after last recorded tick {last} for ({site}, {vo})")
        series.append(tick, cpus)
        series.evict_before(tick - self._retention_ticks)
        if self._memo:
            self._memo.clear()
        return self

    def window_average(self, site: str, vo: str, window_s: int, now_tick: int, site_cpus: int = None) -> float:
        """
        Average fraction of the site used by the VO over ticks [now - window, now).
        """
        if window_s <= 0:
            raise LedgerError("window must be positive")
        if window_s > self.retention_s:
            raise LedgerError(f"window of {window_s} s exceeds retention of {self.retention_s} s")
        cpus = site_cpus if site_cpus is not None else self.site_cpus[site]
        window_ticks = max(1, window_s // self.tick_step_s)
        key = (site, vo, window_ticks, now_tick, cpus)
        cached = self._memo.get(key)
        if cached is not None:
            return cached

        series = self._series.get((site, vo))
        used = series.sum_between(now_tick - window_ticks, now_tick) if series else 0
        value = min(1.0, (used * self.tick_step_s) / (window_s * cpus))
        self._memo[key] = value
        return value
