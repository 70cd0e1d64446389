"""Port and vessel efficiency metrics over segmented voyages.

Turnaround time runs from the first berthing to the final unberthing of a
terminal stay; the anchorage wait is the anchored time spent before that
berthing. Daily arrival counts are bucketed by UTC date and vessel category
and can be scored against port ground-truth call records with a per-category
mean absolute error.
"""

import csv
import datetime as dt
import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .geo import PortGeometry
from .voyage import Voyage

CATEGORIES = ("cargo", "tanker", "passenger", "other")


class EmptyOverlap(ValueError):
    """Predicted and ground-truth tables share no usable dates."""


def vessel_category(ship_type: int | None) -> str:
    """Reporting category for an AIS ship-type code; total over 0..99."""
    if ship_type is None:
        return "other"
    if 70 <= ship_type <= 79:
        return "cargo"
    if 80 <= ship_type <= 89:
        return "tanker"
    if 40 <= ship_type <= 49 or 60 <= ship_type <= 69:
        return "passenger"
    return "other"


@dataclass(frozen=True)
class TurnaroundRecord:
    """Berthing-to-unberthing interval for one terminal stay."""

    mmsi: int
    terminal_name: str | None
    arrival: dt.datetime
    departure: dt.datetime

    @property
    def turnaround(self) -> dt.timedelta:
        return self.departure - self.arrival


def turnaround(
    voyage: Voyage,
    port: PortGeometry | None = None,
    *,
    merge_gap: dt.timedelta = dt.timedelta(hours=1),
) -> TurnaroundRecord | None:
    """Turnaround of the voyage's first terminal stay, or None if it never moored.

    Moored phases separated by less than merge_gap are treated as one stay;
    with port geometry available the merge additionally requires both phases
    to sit in the same terminal polygon.
    """
    moored = [p for p in voyage.phases if p.kind == "moored"]
    if not moored:
        return None

    def terminal_name(phase):
        if port is None:
            return None
        poly = port.terminal_at(phase.lat, phase.lon)
        return poly.name if poly else None

    stay = [moored[0]]
    first_name = terminal_name(moored[0])
    for p in moored[1:]:
        if p.start - stay[-1].end >= merge_gap:
            break
        if port is not None:
            name = terminal_name(p)
            if name is None or name != first_name:
                break
        stay.append(p)
    return TurnaroundRecord(
        mmsi=voyage.mmsi,
        terminal_name=first_name,
        arrival=stay[0].start,
        departure=stay[-1].end,
    )


def anchorage_wait(voyage: Voyage) -> dt.timedelta:
    """Total anchored time before the first berthing."""
    total = dt.timedelta(0)
    for p in voyage.phases:
        if p.kind == "moored":
            break
        if p.kind == "anchored":
            total += p.duration
    return total


def movement_stats(voyage: Voyage) -> tuple[dt.timedelta, float | None]:
    """Total underway time and the message-weighted mean underway speed."""
    total = dt.timedelta(0)
    weighted = 0.0
    weight = 0
    for p in voyage.phases:
        if p.kind != "underway":
            continue
        total += p.duration
        if p.mean_sog is not None and p.n_sog:
            weighted += p.mean_sog * p.n_sog
            weight += p.n_sog
    return total, (weighted / weight if weight else None)


ArrivalTable = dict  # dict[dt.date, dict[str, int]]


def daily_arrivals(
    voyages: Iterable[Voyage],
    categories: Mapping[int, str],
    start: dt.date | None = None,
    end: dt.date | None = None,
) -> ArrivalTable:
    """Count voyages per UTC arrival date and vessel category.

    Vessels without static data fall into "other". The table is dense over
    [start, end]; without an explicit range it spans the observed arrivals.
    """
    arrivals: list[tuple[dt.date, str]] = [
        (v.arrival.date(), categories.get(v.mmsi, "other")) for v in voyages
    ]
    if start is None or end is None:
        if not arrivals:
            return {}
        dates = [d for d, _ in arrivals]
        start = start or min(dates)
        end = end or max(dates)
    table: ArrivalTable = {}
    day = start
    while day <= end:
        table[day] = {cat: 0 for cat in CATEGORIES}
        day += dt.timedelta(days=1)
    for date, cat in arrivals:
        if start <= date <= end:
            table[date][cat] += 1
    return table


def arrivals_mae(
    predicted: ArrivalTable,
    truth: ArrivalTable,
    exclude_dates: Iterable[dt.date] = (),
) -> tuple[dict[str, float], float]:
    """Per-category MAE of daily arrival counts plus the macro average.

    Scored over the overlap of the two tables' date ranges, minus any
    explicitly excluded dates (e.g. days with known data loss). Categories
    are the ones present in the ground truth.
    """
    if not predicted or not truth:
        raise EmptyOverlap("one of the tables is empty")
    excluded = set(exclude_dates)
    lo = max(min(predicted), min(truth))
    hi = min(max(predicted), max(truth))
    dates = [
        lo + dt.timedelta(days=i)
        for i in range((hi - lo).days + 1)
        if lo + dt.timedelta(days=i) not in excluded
    ]
    if not dates:
        raise EmptyOverlap(f"no shared dates between {lo} and {hi}")
    cats = [c for c in CATEGORIES if any(c in row for row in truth.values())]
    if not cats:
        raise EmptyOverlap("ground truth has no recognized categories")
    maes = {}
    for cat in cats:
        err = 0
        for d in dates:
            pred = predicted.get(d, {}).get(cat, 0)
            true = truth.get(d, {}).get(cat, 0)
            err += abs(pred - true)
        maes[cat] = err / len(dates)
    return maes, sum(maes.values()) / len(maes)


def schedule_table(voyages: Iterable[Voyage], port: PortGeometry | None = None) -> list[TurnaroundRecord]:
    """Chronological turnaround records, e.g. for one vessel's service line."""
    records = [turnaround(v, port) for v in voyages]
    return sorted((r for r in records if r is not None), key=lambda r: r.arrival)


def weekly_aggregate(
    records: Sequence[TurnaroundRecord], statistic: str = "mean"
) -> dict[str, dt.timedelta | int]:
    """Aggregate turnarounds per ISO week: mean, median, or count."""
    if statistic not in ("mean", "median", "count"):
        raise ValueError(f"unsupported statistic {statistic!r}")
    groups: dict[str, list[float]] = {}
    for r in records:
        year, week, _ = r.arrival.isocalendar()
        groups.setdefault(f"{year}-W{week:02d}", []).append(r.turnaround.total_seconds())
    out: dict[str, dt.timedelta | int] = {}
    for key in sorted(groups):
        values = groups[key]
        if statistic == "count":
            out[key] = len(values)
        elif statistic == "mean":
            out[key] = dt.timedelta(seconds=sum(values) / len(values))
        else:
            out[key] = dt.timedelta(seconds=statistics.median(values))
    return out


def load_ground_truth(path) -> ArrivalTable:
    """Read port call records from CSV into a daily arrival table.

    Two layouts are accepted: `date,category,arrivals` with per-day counts,
    or `timestamp,mmsi,category` with one row per call event.
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty ground-truth file")
        header = [h.strip().lower() for h in header]
        table: ArrivalTable = {}
        if header == ["date", "category", "arrivals"]:
            for row in reader:
                if not row or not row[0].strip():
                    continue
                date = dt.date.fromisoformat(row[0].strip())
                cat = row[1].strip().lower()
                count = int(row[2])
                if count < 0:
                    raise ValueError(f"{path}: negative arrival count on {date}")
                table.setdefault(date, {})
                table[date][cat] = table[date].get(cat, 0) + count
        elif header == ["timestamp", "mmsi", "category"]:
            from .jsonl import parse_ts

            for row in reader:
                if not row or not row[0].strip():
                    continue
                date = parse_ts(row[0].strip()).date()
                cat = row[2].strip().lower()
                table.setdefault(date, {})
                table[date][cat] = table[date].get(cat, 0) + 1
        else:
            raise ValueError(f"{path}: unrecognized header {header}")
    if not table:
        raise ValueError(f"{path}: no ground-truth rows")
    return table
