"""Summary analyses over emitted records, as plot-ready tables.

Four analyses: weekly issuance counts, top-k IPC subclasses, lag-day
quartiles by subclass, and lag-day quartiles by issue year.  All are
associative group-by reductions over immutable records; shuffling the
input changes no output table.

Quartiles use the median-of-halves rule (Tukey hinges): with an odd
number of values the median belongs to both halves.  Lag values are
whole days between application and issue; negative lags indicate source
data errors and are excluded from the quartiles but reported in a
data-quality column rather than silently dropped.
"""

from __future__ import annotations

import datetime as dt
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Optional, Sequence, TextIO, Union

from .model import PatentRecord, first_grant_tuesday

QUARTILE_RULE = "median-of-halves (Tukey hinges)"


@dataclass(frozen=True)
class WeeklyCount:
    year: int
    week: int
    count: int


@dataclass(frozen=True)
class ClassCount:
    subclass_key: str
    count: int


@dataclass(frozen=True)
class LagStats:
    """Quartile summary of lag days for one group.

    ``count`` covers the non-negative lags the quartiles summarize;
    ``negative_lags`` tallies excluded negative values.
    """

    group_key: Union[str, int]
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    negative_lags: int = 0


def lag_days(record: PatentRecord) -> Optional[int]:
    """Calendar days between application and issue; absent without an
    application date.  Negative differences are returned as-is."""
    if record.app_date is None:
        return None
    return (record.issue_date - record.app_date).days


def week_of_issue_date(d: dt.date) -> tuple[int, int]:
    """Grant-week bucket of a date: (year, index of its Tuesday week)."""
    return d.year, (d - first_grant_tuesday(d.year)).days // 7 + 1


def weekly_counts(
    records: Iterable[PatentRecord],
    week_of: Optional[Callable[[PatentRecord], tuple[int, int]]] = None,
) -> list[WeeklyCount]:
    """Exact group-and-count per week, sorted by (year, week).

    The pipeline knows each record's source week; flat-file consumers
    fall back to deriving the week from the issue date, which is the
    grant Tuesday the weekly file is named after.
    """
    if week_of is None:
        week_of = lambda record: week_of_issue_date(record.issue_date)
    counts: Counter = Counter(week_of(record) for record in records)
    return [WeeklyCount(year, week, n) for (year, week), n in sorted(counts.items())]


def _record_subclasses(record: PatentRecord) -> list[str]:
    """Distinct 4-character subclass keys on a record, first-seen order.

    Codes lacking a subclass letter cannot form the 4-character key and
    are left out of class tables.
    """
    seen: list[str] = []
    for code in record.ipc_codes:
        if code.subclass is None:
            continue
        key = code.subclass_key()
        if key not in seen:
            seen.append(key)
    return seen


def top_ipc_subclasses(records: Iterable[PatentRecord], k: int = 10) -> list[ClassCount]:
    """Top-k subclasses by record count, descending, ties lexicographic.

    A record counts once per distinct subclass it carries: one patent
    classified C07D and C07C increments both.
    """
    if k < 1:
        raise ValueError("k must be positive")
    counts: Counter = Counter()
    for record in records:
        counts.update(_record_subclasses(record))
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return [ClassCount(key, n) for key, n in ranked[:k]]


def _median(sorted_values: Sequence[int]) -> float:
    n = len(sorted_values)
    mid = n // 2
    if n % 2:
        return float(sorted_values[mid])
    return (sorted_values[mid - 1] + sorted_values[mid]) / 2


def tukey_five_number(values: Sequence[int]) -> tuple[float, float, float, float, float]:
    """(min, q1, median, q3, max) with hinges from median-of-halves."""
    ordered = sorted(values)
    n = len(ordered)
    lower = ordered[: (n + 1) // 2]
    upper = ordered[n // 2 :]
    return (
        float(ordered[0]),
        _median(lower),
        _median(ordered),
        _median(upper),
        float(ordered[-1]),
    )


def _group_lag_stats(
    records: Iterable[PatentRecord],
    keys_of: Callable[[PatentRecord], Iterable[Hashable]],
) -> dict[Hashable, LagStats]:
    lags: dict[Hashable, list[int]] = defaultdict(list)
    negatives: Counter = Counter()
    for record in records:
        lag = lag_days(record)
        if lag is None:
            continue
        for key in keys_of(record):
            if lag < 0:
                negatives[key] += 1
            else:
                lags[key].append(lag)
    stats = {}
    for key, values in lags.items():
        low, q1, median, q3, high = tukey_five_number(values)
        stats[key] = LagStats(
            group_key=key,
            count=len(values),
            min=low,
            q1=q1,
            median=median,
            q3=q3,
            max=high,
            negative_lags=negatives.get(key, 0),
        )
    return stats


def lag_stats_by(
    records: Iterable[PatentRecord],
    key: Callable[[PatentRecord], Optional[Hashable]],
) -> list[LagStats]:
    """Lag quartiles per group, sorted by group key; records whose key is
    None and groups with no defined non-negative lag are omitted."""

    def keys_of(record: PatentRecord) -> Iterable[Hashable]:
        k = key(record)
        return () if k is None else (k,)

    stats = _group_lag_stats(records, keys_of)
    return [stats[k] for k in sorted(stats)]


def lag_stats_by_year(records: Iterable[PatentRecord]) -> list[LagStats]:
    return lag_stats_by(records, lambda record: record.issue_date.year)


def lag_stats_by_class(
    records: Iterable[PatentRecord], top: int = 10
) -> list[LagStats]:
    """Lag quartiles for the top subclasses only, in class-count order.

    Records outside the top classes are filtered out first; a record in
    several top classes contributes its lag to each of them.
    """
    record_list = list(records)
    ranked = top_ipc_subclasses(record_list, top)
    top_keys = {entry.subclass_key for entry in ranked}

    def keys_of(record: PatentRecord) -> Iterable[Hashable]:
        return [key for key in _record_subclasses(record) if key in top_keys]

    stats = _group_lag_stats(record_list, keys_of)
    return [stats[entry.subclass_key] for entry in ranked if entry.subclass_key in stats]


def median_lag_delta(stats: Sequence[LagStats]) -> Optional[tuple[int, int, float]]:
    """(first year, last year, median difference) of a by-year table.

    The by-year trend is reported, not asserted: downstream readers judge
    whether lag times drift over the collected window.
    """
    years = [s for s in stats if isinstance(s.group_key, int)]
    if len(years) < 2:
        return None
    first = min(years, key=lambda s: s.group_key)
    last = max(years, key=lambda s: s.group_key)
    return first.group_key, last.group_key, last.median - first.median


def _format_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_table(rows: Iterable[tuple], header: Sequence[str], out: TextIO) -> None:
    """Emit a plot-ready CSV table; numbers are formatted minimally."""
    import csv

    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [_format_number(v) if isinstance(v, float) else v for v in row]
        )


def weekly_table(stats: Sequence[WeeklyCount], out: TextIO) -> None:
    write_table(((s.year, s.week, s.count) for s in stats), ("year", "week", "count"), out)


def classes_table(stats: Sequence[ClassCount], out: TextIO) -> None:
    write_table(((s.subclass_key, s.count) for s in stats), ("subclass", "count"), out)


LAG_HEADER = ("group", "count", "min", "q1", "median", "q3", "max", "negative_lags")


def lag_table(stats: Sequence[LagStats], out: TextIO) -> None:
    write_table(
        (
            (s.group_key, s.count, s.min, s.q1, s.median, s.q3, s.max, s.negative_lags)
            for s in stats
        ),
        LAG_HEADER,
        out,
    )
