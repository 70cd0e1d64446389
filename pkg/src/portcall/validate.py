"""Navigational-status validation and data-outage detection.

Three independent ways to decide whether a position report belongs to an
underway (0), anchored (1) or moored (5) vessel:

  geofence   stopped inside a terminal polygon -> moored, inside an
             anchorage polygon -> anchored, otherwise underway.
  kinematic  stopped vessels that keep rotating are anchored; vessels whose
             heading stays put are moored. Rotation is measured as the mean
             resultant length of the cyclically encoded headings over a
             trailing window of stopped samples.
  knn        nearest-neighbour vote over the locations of previously stopped
             vessels, labelled with their reported statuses.

The ensemble uses the geofence as the base answer, lets a sufficient
kinematic window override it, and asks the knn model to break ties between
the two. A debounce filter suppresses single-message status flips so that
vessels hovering on a polygon border do not flap between states.
"""

import datetime as dt
import math
import operator
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .codec import PositionReport
from .geo import PortGeometry, UnavailableHeading, _project_unchecked, resultant_length

UTC = dt.timezone.utc


class UnavailableSpeed(ValueError):
    """Speed over ground carries the not-available sentinel."""


class InsufficientWindow(ValueError):
    """Stopped window is too short for the kinematic classifier."""


class TooFewPoints(ValueError):
    """Not enough stopped training points to fit the requested k."""


UNDERWAY, ANCHORED, MOORED = 0, 1, 5

METHODS = ("geofence", "kinematic", "knn", "ensemble")


@dataclass
class ValidationConfig:
    """Tunables for the status-correction pipeline.

    Loadable from a `key = value` text file; unknown keys are rejected so
    typos do not silently fall back to defaults.
    """

    method: str = "ensemble"
    stopped_threshold_kn: float = 0.5
    knn_k: int = 300
    rotation_window_h: float = 3.0
    rotation_rbar: float = 0.98
    hysteresis_msgs: int = 2
    hysteresis_min: float = 10.0

    _FIELD_TYPES = {
        "method": str,
        "stopped_threshold_kn": float,
        "knn_k": int,
        "rotation_window_h": float,
        "rotation_rbar": float,
        "hysteresis_msgs": int,
        "hysteresis_min": float,
    }

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "ValidationConfig":
        kwargs = {}
        for key, value in mapping.items():
            caster = cls._FIELD_TYPES.get(key)
            if caster is None:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = caster(value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ValidationConfig":
        mapping = {}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, value = line.split("=", 1)
                mapping[key.strip()] = value.strip()
        return cls.from_mapping(mapping)


def _fallback_status(code: int) -> int:
    """Reported status coerced into {0, 1, 5}; anything else means underway."""
    return code if code in (UNDERWAY, ANCHORED, MOORED) else UNDERWAY


def is_stopped(report: PositionReport, threshold_kn: float = 0.5) -> bool:
    """True when speed over ground is strictly below the threshold."""
    if report.sog is None:
        raise UnavailableSpeed(f"mmsi {report.mmsi}: sog unavailable")
    return report.sog < threshold_kn


def classify_geofence(report: PositionReport, port: PortGeometry, *, stopped_threshold_kn: float = 0.5) -> int:
    """Status from position and speed against the port polygons."""
    if not is_stopped(report, stopped_threshold_kn):
        return UNDERWAY
    if port.terminal_at(report.lat, report.lon) is not None:
        return MOORED
    if port.anchorage_at(report.lat, report.lon) is not None:
        return ANCHORED
    return UNDERWAY


def classify_kinematic(
    window: Sequence[PositionReport],
    *,
    stopped_threshold_kn: float = 0.5,
    min_window_h: float = 3.0,
    rbar_threshold: float = 0.98,
    min_heading_fraction: float = 0.5,
) -> int:
    """Status of the window's last report from speed and heading spread.

    Looks at the trailing contiguous run of stopped samples. A rotating
    heading (low mean resultant length) means the vessel swings at anchor;
    a frozen heading means it is tied up at a berth.
    """
    if not window:
        raise InsufficientWindow("empty window")
    last = window[-1]
    if not is_stopped(last, stopped_threshold_kn):
        return UNDERWAY
    run: list[PositionReport] = []
    for report in reversed(window):
        if report.sog is None:
            continue  # missing speed neither extends nor breaks the run
        if report.sog >= stopped_threshold_kn:
            break
        run.append(report)
    span = run[0].timestamp - run[-1].timestamp  # run is in reverse order
    if span < dt.timedelta(hours=min_window_h):
        raise InsufficientWindow(f"stopped span {span} < {min_window_h} h")
    headings = [r.heading for r in run if r.heading is not None]
    if len(headings) < min_heading_fraction * len(run):
        raise UnavailableHeading(f"headings available for {len(headings)}/{len(run)} samples")
    return ANCHORED if resultant_length(headings) < rbar_threshold else MOORED


@dataclass(frozen=True)
class KnnModel:
    """Location-only k-nearest-neighbour status model for stopped vessels."""

    k: int
    origin: tuple[float, float]
    xy: np.ndarray  # (n, 2) planar metres around origin
    labels: np.ndarray  # (n,) uint8 with values 1 (anchored) and 5 (moored)


def fit_knn(reports: Iterable[PositionReport], k: int = 300, *, stopped_threshold_kn: float = 0.5) -> KnnModel:
    """Fit the model on stopped reports whose reported status is 1 or 5.

    The reported statuses double as labels; the projection origin is the
    centroid of the training points.
    """
    lats, lons, labels = [], [], []
    for r in reports:
        if r.navstat in (ANCHORED, MOORED) and r.sog is not None and r.sog < stopped_threshold_kn:
            lats.append(r.lat)
            lons.append(r.lon)
            labels.append(r.navstat)
    if k < 1:
        raise TooFewPoints(f"k must be >= 1, got {k}")
    if len(labels) < k:
        raise TooFewPoints(f"{len(labels)} stopped training points, need >= {k}")
    lat_arr = np.asarray(lats, dtype=np.float64)
    lon_arr = np.asarray(lons, dtype=np.float64)
    lat0 = float(lat_arr.mean())
    lon0 = float(lon_arr.mean())
    dlon = (lon_arr - lon0 + 180.0) % 360.0 - 180.0
    xy = np.empty((len(labels), 2), dtype=np.float64)
    xy[:, 0] = np.radians(dlon) * math.cos(math.radians(lat0)) * 6_371_000.0
    xy[:, 1] = np.radians(lat_arr - lat0) * 6_371_000.0
    return KnnModel(k=k, origin=(lat0, lon0), xy=xy, labels=np.asarray(labels, dtype=np.uint8))


def _neighbor_indices(model: KnnModel, x: float, y: float) -> np.ndarray:
    """Indices of the k nearest training points, ties broken by index.

    Equivalent to sorting by (distance, index) and taking the first k, which
    keeps the vote identical to an exhaustive scan even with duplicate
    training points.
    """
    d2 = (model.xy[:, 0] - x) ** 2 + (model.xy[:, 1] - y) ** 2
    n = d2.shape[0]
    k = model.k
    if k >= n:
        return np.arange(n)
    part = np.argpartition(d2, k - 1)[:k]
    dk = d2[part].max()
    strict = np.flatnonzero(d2 < dk)
    ties = np.flatnonzero(d2 == dk)
    return np.concatenate([strict, ties[: k - strict.shape[0]]])


def classify_knn(model: KnnModel, report: PositionReport, *, stopped_threshold_kn: float = 0.5) -> int:
    """Majority label of the k nearest training points; ties go to anchored."""
    if not is_stopped(report, stopped_threshold_kn):
        return UNDERWAY
    x, y = _project_unchecked(model.origin[0], model.origin[1], report.lat, report.lon)
    idx = _neighbor_indices(model, x, y)
    ones = int(np.count_nonzero(model.labels[idx] == ANCHORED))
    return ANCHORED if ones >= idx.shape[0] - ones else MOORED


# ---------------------------------------------------------------------------
# outage detection


@dataclass(frozen=True)
class Outage:
    """An interval of missing data at vessel, area, or global scope."""

    scope: str  # "global" | "vessel" | "area"
    start: dt.datetime
    end: dt.datetime
    subject: int | str | None = None  # mmsi for vessel scope, "i,j" cell for area
    cell_deg: float | None = None

    @property
    def duration(self) -> dt.timedelta:
        return self.end - self.start


def _grid_cell(lat: float, lon: float, cell_deg: float) -> tuple[int, int]:
    return (math.floor(lat / cell_deg), math.floor(lon / cell_deg))


def _recent_cadence_ok(times: list[dt.datetime], idx: int, max_cadence: dt.timedelta, lookback: int = 5) -> bool:
    """True when the up-to-`lookback` intervals ending at times[idx] are dense."""
    start = max(0, idx - lookback)
    intervals = [times[i + 1] - times[i] for i in range(start, idx)]
    if len(intervals) < 2:
        return False
    intervals.sort()
    return intervals[len(intervals) // 2] < max_cadence


def detect_outages(
    reports: Iterable[PositionReport],
    now: dt.datetime | None = None,
    *,
    global_gap_min: float = 15.0,
    vessel_gap_min: float = 60.0,
    vessel_cadence_min: float = 5.0,
    area_gap_min: float = 60.0,
    area_cell_deg: float = 0.05,
) -> list[Outage]:
    """Find global, per-vessel, and per-area holes in a message stream.

    A global outage is silence across all vessels; a vessel outage is a
    vessel that was reporting densely (median interval under the cadence
    threshold) going silent and later reappearing; an area outage is a
    previously busy grid cell going silent while traffic elsewhere
    continues.
    """
    msgs = sorted(reports, key=operator.attrgetter("timestamp"))
    if not msgs:
        return []
    global_gap = dt.timedelta(minutes=global_gap_min)
    vessel_gap = dt.timedelta(minutes=vessel_gap_min)
    cadence = dt.timedelta(minutes=vessel_cadence_min)
    area_gap = dt.timedelta(minutes=area_gap_min)

    outages: list[Outage] = []
    all_times = [m.timestamp for m in msgs]
    for i in range(len(all_times) - 1):
        if all_times[i + 1] - all_times[i] > global_gap:
            outages.append(Outage("global", all_times[i], all_times[i + 1]))
    if now is not None and now - all_times[-1] > global_gap:
        outages.append(Outage("global", all_times[-1], now))

    by_vessel: dict[int, list[dt.datetime]] = {}
    by_cell: dict[tuple[int, int], list[dt.datetime]] = {}
    for m in msgs:
        by_vessel.setdefault(m.mmsi, []).append(m.timestamp)
        by_cell.setdefault(_grid_cell(m.lat, m.lon, area_cell_deg), []).append(m.timestamp)

    for mmsi, times in by_vessel.items():
        for i in range(len(times) - 1):
            if times[i + 1] - times[i] > vessel_gap and _recent_cadence_ok(times, i, cadence):
                outages.append(Outage("vessel", times[i], times[i + 1], subject=mmsi))

    import bisect

    for cell, times in by_cell.items():
        for i in range(len(times) - 1):
            if times[i + 1] - times[i] > area_gap and _recent_cadence_ok(times, i, cadence):
                # only an area problem if the rest of the stream kept flowing
                lo = bisect.bisect_right(all_times, times[i])
                hi = bisect.bisect_left(all_times, times[i + 1])
                if hi > lo:
                    outages.append(
                        Outage(
                            "area",
                            times[i],
                            times[i + 1],
                            subject=f"{cell[0]},{cell[1]}",
                            cell_deg=area_cell_deg,
                        )
                    )
    outages.sort(key=lambda o: (o.start, o.scope, str(o.subject)))
    return outages


# ---------------------------------------------------------------------------
# stream validation


@dataclass(slots=True)
class ValidatedMessage:
    """A position report plus the corrected status and its provenance.

    method names the classifier whose vote produced the candidate status for
    this message; corrected_navstat is the value after debouncing, so a
    suppressed single-message flip keeps the surrounding status.
    """

    report: PositionReport
    corrected_navstat: int
    method: str
    agreed_with_reported: bool
    gap_flag: bool


class _StopRun:
    """Incremental view of the trailing contiguous run of stopped samples."""

    __slots__ = ("start", "end", "n", "n_heading", "sum_s", "sum_c")

    def __init__(self):
        self.reset()

    def reset(self):
        self.start = None
        self.end = None
        self.n = 0
        self.n_heading = 0
        self.sum_s = 0.0
        self.sum_c = 0.0

    def add(self, ts: dt.datetime, heading: float | None):
        if self.start is None:
            self.start = ts
        self.end = ts
        self.n += 1
        if heading is not None:
            angle = 2.0 * math.pi * (heading % 360.0) / 360.0
            self.sum_s += math.sin(angle)
            self.sum_c += math.cos(angle)
            self.n_heading += 1

    def span(self) -> dt.timedelta:
        if self.start is None:
            return dt.timedelta(0)
        return self.end - self.start

    def rbar(self) -> float:
        return math.hypot(self.sum_s / self.n_heading, self.sum_c / self.n_heading)


def _apply_hysteresis(
    candidates: list[int], times: list[dt.datetime], min_msgs: int, min_minutes: float
) -> list[int]:
    """Debounce a per-vessel candidate status sequence.

    A new value becomes the accepted status once it persists for min_msgs
    consecutive messages or min_minutes of elapsed time; a confirmed change
    applies from its first message, so clean transitions are reproduced
    exactly. Shorter excursions are rewritten to the previously accepted
    status.
    """
    n = len(candidates)
    out = list(candidates)
    if n == 0:
        return out
    min_span = dt.timedelta(minutes=min_minutes)
    accepted = out[0]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and out[j + 1] == out[i]:
            j += 1
        value = out[i]
        if value != accepted:
            if (j - i + 1) >= min_msgs or (times[j] - times[i]) >= min_span:
                accepted = value
            else:
                for idx in range(i, j + 1):
                    out[idx] = accepted
        i = j + 1
    return out


class _OutageIndex:
    """Per-vessel view of the outages a message gap could overlap.

    Message times are non-decreasing within a vessel, so a moving pointer
    over the start-sorted global+vessel intervals keeps the per-message
    check O(1); area outages are grouped by grid cell and only the cells of
    the two straddling messages are consulted.
    """

    def __init__(self, outages: Sequence[Outage]):
        self.globals: list[tuple[dt.datetime, dt.datetime]] = []
        self.by_vessel: dict[int, list[tuple[dt.datetime, dt.datetime]]] = {}
        self.by_cell: dict[tuple[int, int], list[tuple[dt.datetime, dt.datetime]]] = {}
        self.cell_deg: float | None = None
        for o in outages:
            if o.scope == "global":
                self.globals.append((o.start, o.end))
            elif o.scope == "vessel":
                self.by_vessel.setdefault(o.subject, []).append((o.start, o.end))
            elif o.scope == "area" and o.cell_deg:
                cell = tuple(int(v) for v in str(o.subject).split(","))
                self.by_cell.setdefault(cell, []).append((o.start, o.end))
                self.cell_deg = o.cell_deg

    def for_vessel(self, mmsi: int) -> "_VesselOutages":
        intervals = sorted(self.globals + self.by_vessel.get(mmsi, []))
        return _VesselOutages(intervals, self.by_cell, self.cell_deg)


class _VesselOutages:
    __slots__ = ("intervals", "by_cell", "cell_deg", "_idx")

    def __init__(self, intervals, by_cell, cell_deg):
        self.intervals = intervals
        self.by_cell = by_cell
        self.cell_deg = cell_deg
        self._idx = 0

    def gap_flag(self, prev: PositionReport | None, cur: PositionReport) -> bool:
        """True when the gap before `cur` contains a relevant outage.

        Containment (not mere overlap) is required: a vessel that kept
        transmitting underneath somebody else's outage window was not
        silenced by it.
        """
        if prev is None:
            return False
        prev_ts = prev.timestamp
        cur_ts = cur.timestamp
        intervals = self.intervals
        n = len(intervals)
        i = self._idx
        while i < n and intervals[i][1] <= prev_ts:
            i += 1
        self._idx = i
        j = i
        while j < n and intervals[j][0] < cur_ts:
            if intervals[j][0] >= prev_ts and intervals[j][1] <= cur_ts:
                return True
            j += 1
        if self.cell_deg is not None:
            cells = {
                _grid_cell(prev.lat, prev.lon, self.cell_deg),
                _grid_cell(cur.lat, cur.lon, self.cell_deg),
            }
            for cell in cells:
                for start, end in self.by_cell.get(cell, ()):
                    if start >= prev_ts and end <= cur_ts:
                        return True
        return False


def _knn_vote(model: KnnModel, report: PositionReport) -> int:
    x, y = _project_unchecked(model.origin[0], model.origin[1], report.lat, report.lon)
    idx = _neighbor_indices(model, x, y)
    ones = int(np.count_nonzero(model.labels[idx] == ANCHORED))
    return ANCHORED if ones >= idx.shape[0] - ones else MOORED


def _stopped_candidate(
    report: PositionReport,
    run: _StopRun,
    port: PortGeometry | None,
    model: KnnModel | None,
    cfg: ValidationConfig,
    min_window: dt.timedelta,
) -> tuple[int, str]:
    """Candidate status for a stopped report under the configured method."""
    geo_vote = None
    if port is not None:
        if port.terminal_at(report.lat, report.lon) is not None:
            geo_vote = MOORED
        elif port.anchorage_at(report.lat, report.lon) is not None:
            geo_vote = ANCHORED
        else:
            geo_vote = UNDERWAY

    kin_vote = None
    if cfg.method in ("kinematic", "ensemble"):
        if run.n_heading > 0 and run.n_heading * 2 >= run.n and run.span() >= min_window:
            kin_vote = ANCHORED if run.rbar() < cfg.rotation_rbar else MOORED

    if cfg.method == "geofence":
        if geo_vote is not None:
            return geo_vote, "geofence"
        return _fallback_status(report.navstat), "reported"
    if cfg.method == "kinematic":
        if kin_vote is not None:
            return kin_vote, "kinematic"
        if geo_vote is not None:
            return geo_vote, "geofence"
        return _fallback_status(report.navstat), "reported"
    if cfg.method == "knn":
        if model is not None:
            return _knn_vote(model, report), "knn"
        if geo_vote is not None:
            return geo_vote, "geofence"
        return _fallback_status(report.navstat), "reported"
    # ensemble: geofence base, kinematic override, knn breaks disagreements
    if geo_vote is None and kin_vote is None:
        if model is not None:
            return _knn_vote(model, report), "knn"
        return _fallback_status(report.navstat), "reported"
    if kin_vote is None:
        return geo_vote, "geofence"
    if geo_vote is None:
        return kin_vote, "kinematic"
    if geo_vote == kin_vote:
        return geo_vote, "geofence"
    if model is not None:
        return _knn_vote(model, report), "knn"
    return kin_vote, "kinematic"


def validate_stream(
    reports: Iterable[PositionReport],
    port: PortGeometry | None = None,
    config: ValidationConfig | None = None,
    *,
    outages: Sequence[Outage] | None = None,
    knn_model: KnnModel | None = None,
) -> list[ValidatedMessage]:
    """Correct the status of every report; nothing is dropped.

    The input is processed per vessel in timestamp order; the output is the
    whole stream sorted by (timestamp, mmsi). Outages are detected on the
    stream itself unless supplied, and the knn model is fitted from the
    stream's own stopped reports when the method needs one.
    """
    cfg = config or ValidationConfig()
    msgs = sorted(reports, key=operator.attrgetter("timestamp", "mmsi"))
    if outages is None:
        outages = detect_outages(msgs)
    model = knn_model
    if model is None and cfg.method in ("knn", "ensemble"):
        try:
            model = fit_knn(msgs, cfg.knn_k, stopped_threshold_kn=cfg.stopped_threshold_kn)
        except TooFewPoints:
            model = None

    base_label = "geofence" if port is not None else cfg.method if cfg.method != "ensemble" else "kinematic"
    by_vessel: dict[int, list[int]] = {}
    for i, m in enumerate(msgs):
        by_vessel.setdefault(m.mmsi, []).append(i)

    corrected = [0] * len(msgs)
    methods = [""] * len(msgs)
    gap_flags = [False] * len(msgs)
    threshold = cfg.stopped_threshold_kn
    min_window = dt.timedelta(hours=cfg.rotation_window_h)
    outage_index = _OutageIndex(outages)
    for mmsi, indices in by_vessel.items():
        vessel_outages = outage_index.for_vessel(mmsi)
        run = _StopRun()
        candidates: list[int] = []
        times: list[dt.datetime] = []
        prev: PositionReport | None = None
        for i in indices:
            m = msgs[i]
            gap_flags[i] = vessel_outages.gap_flag(prev, m)
            if m.sog is None:
                cand, meth = _fallback_status(m.navstat), "reported"
            elif m.sog >= threshold:
                run.reset()
                cand, meth = UNDERWAY, base_label
            else:
                run.add(m.timestamp, m.heading)
                cand, meth = _stopped_candidate(m, run, port, model, cfg, min_window)
            candidates.append(cand)
            times.append(m.timestamp)
            methods[i] = meth
            prev = m
        final = _apply_hysteresis(candidates, times, cfg.hysteresis_msgs, cfg.hysteresis_min)
        for i, value in zip(indices, final):
            corrected[i] = value

    return [
        ValidatedMessage(m, corrected[i], methods[i], corrected[i] == m.navstat, gap_flags[i])
        for i, m in enumerate(msgs)
    ]
