"""Synthetic port scenarios with exact ground truth.

Generates NMEA streams for a made-up port: vessels approach through an entry
waypoint, optionally swing at anchor (heading slowly rotating, position
jittering a few tens of metres), berth at a terminal (heading frozen within
a couple of degrees), and leave. Reported navigational statuses can be
corrupted with a configurable per-message probability, and scheduled outages
drop messages at global, vessel, or area scope.

Every generated sentence carries its receiver timestamp in a NMEA TAG block
so the stream replays deterministically. The truth log records vessel
identities, exact phase boundaries, daily arrival counts, and the injected
outages, which makes it the oracle for the validation and metrics tests.
"""

import datetime as dt
import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterable

from .codec import ARMOR_ALPHABET, nmea_checksum
from .geo import AreaFilter, EARTH_RADIUS_M, PortGeometry, Polygon
from .jsonl import format_ts, parse_ts
from .metrics import vessel_category

UTC = dt.timezone.utc

UNDERWAY, ANCHORED, MOORED = 0, 1, 5
_STATUS_KIND = {UNDERWAY: "underway", ANCHORED: "anchored", MOORED: "moored"}


class InvalidScenario(ValueError):
    """Scenario fails structural validation."""


def _offset(lat: float, lon: float, north_m: float, east_m: float) -> tuple[float, float]:
    dlat = math.degrees(north_m / EARTH_RADIUS_M)
    dlon = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(lat))))
    return lat + dlat, lon + dlon


def _local_xy(lat0: float, lon0: float, lat: float, lon: float) -> tuple[float, float]:
    x = math.radians(lon - lon0) * math.cos(math.radians(lat0)) * EARTH_RADIUS_M
    y = math.radians(lat - lat0) * EARTH_RADIUS_M
    return x, y


def _dist_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    x, y = _local_xy(a[0], a[1], b[0], b[1])
    return math.hypot(x, y)


def _bearing_deg(a: tuple[float, float], b: tuple[float, float]) -> float:
    x, y = _local_xy(a[0], a[1], b[0], b[1])
    return math.degrees(math.atan2(x, y)) % 360.0


def _rect(center: tuple[float, float], north_m: float, east_m: float, height_m: float, width_m: float):
    clat, clon = _offset(center[0], center[1], north_m, east_m)
    corners = [
        _offset(clat, clon, +height_m / 2, -width_m / 2),
        _offset(clat, clon, +height_m / 2, +width_m / 2),
        _offset(clat, clon, -height_m / 2, +width_m / 2),
        _offset(clat, clon, -height_m / 2, -width_m / 2),
    ]
    return corners, (clat, clon)


@dataclass(frozen=True)
class PortLayout:
    """Geometry bundle for one synthetic port."""

    center: tuple[float, float]
    geometry: PortGeometry
    area: AreaFilter
    entry: tuple[float, float]
    exit: tuple[float, float]
    anchorage_box: tuple[tuple[float, float], float, float]  # center, height, width
    berths: tuple[tuple[float, float, float], ...]  # lat, lon, quay heading

    def geojson(self) -> dict:
        def feature(poly: Polygon) -> dict:
            ring = [[lon, lat] for lat, lon in poly.ring]
            ring.append(ring[0])
            return {
                "type": "Feature",
                "properties": {"name": poly.name, "kind": poly.kind},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }

        return {
            "type": "FeatureCollection",
            "features": [feature(p) for p in self.geometry.anchorages + self.geometry.terminals],
        }


def build_port(center: tuple[float, float] = (34.45, 18.30), area_radius_m: float = 9000.0) -> PortLayout:
    """Lay out a small two-terminal port with one anchorage roadstead."""
    anch_ring, anch_center = _rect(center, north_m=-2800, east_m=0, height_m=2000, width_m=3200)
    t1_ring, t1_center = _rect(center, north_m=800, east_m=-900, height_m=350, width_m=700)
    t2_ring, t2_center = _rect(center, north_m=800, east_m=900, height_m=350, width_m=700)
    geometry = PortGeometry(
        anchorages=(Polygon("roadstead", "anchorage", tuple(anch_ring)),),
        terminals=(
            Polygon("terminal-west", "terminal", tuple(t1_ring)),
            Polygon("terminal-east", "terminal", tuple(t2_ring)),
        ),
    )
    return PortLayout(
        center=center,
        geometry=geometry,
        area=AreaFilter.circle(center[0], center[1], area_radius_m),
        entry=_offset(center[0], center[1], -6600, 4400),
        exit=_offset(center[0], center[1], -6600, -4400),
        anchorage_box=(anch_center, 2000.0, 3200.0),
        berths=(
            (t1_center[0], t1_center[1], 90.0),
            (t2_center[0], t2_center[1], 270.0),
        ),
    )


@dataclass(frozen=True)
class VisitPlan:
    """One port call: entry instant plus anchorage and berth dwell times."""

    arrive: dt.datetime
    anchor_h: float
    moor_h: float
    terminal: int = 0
    anchor_rate_deg_h: float | None = None  # None draws from [10, 60]


@dataclass(frozen=True)
class VesselPlan:
    mmsi: int
    name: str
    ship_type: int
    visits: tuple[VisitPlan, ...]
    cruise_kn: float = 11.0


@dataclass(frozen=True)
class OutagePlan:
    scope: str  # "global" | "vessel"
    start: dt.datetime
    end: dt.datetime
    mmsi: int | None = None


@dataclass(frozen=True)
class Scenario:
    seed: int
    vessels: tuple[VesselPlan, ...]
    center: tuple[float, float] = (34.45, 18.30)
    error_p: float = 0.0
    outages: tuple[OutagePlan, ...] = ()
    cadence_underway_s: int = 10
    cadence_stopped_s: int = 180
    static_interval_s: int = 1800

    def __post_init__(self):
        if not 0.0 <= self.error_p <= 1.0:
            raise InvalidScenario(f"error_p {self.error_p} outside [0, 1]")
        if self.cadence_underway_s < 1 or self.cadence_stopped_s < 1:
            raise InvalidScenario("cadences must be at least 1 s")
        for vessel in self.vessels:
            last_end = None
            for visit in vessel.visits:
                if visit.anchor_h < 0 or visit.moor_h < 0:
                    raise InvalidScenario(f"mmsi {vessel.mmsi}: negative dwell time")
                if last_end is not None and visit.arrive <= last_end:
                    raise InvalidScenario(f"mmsi {vessel.mmsi}: overlapping visits")
                last_end = visit.arrive + dt.timedelta(hours=visit.anchor_h + visit.moor_h + 3)
        for o in self.outages:
            if o.end <= o.start:
                raise InvalidScenario("outage end must be after start")
            if o.scope not in ("global", "vessel"):
                raise InvalidScenario(f"unknown outage scope {o.scope!r}")
            if o.scope == "vessel" and o.mmsi is None:
                raise InvalidScenario("vessel outage needs an mmsi")

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "center": list(self.center),
            "error_p": self.error_p,
            "cadence_underway_s": self.cadence_underway_s,
            "cadence_stopped_s": self.cadence_stopped_s,
            "static_interval_s": self.static_interval_s,
            "vessels": [
                {
                    "mmsi": v.mmsi,
                    "name": v.name,
                    "ship_type": v.ship_type,
                    "cruise_kn": v.cruise_kn,
                    "visits": [
                        {
                            "arrive": format_ts(visit.arrive),
                            "anchor_h": visit.anchor_h,
                            "moor_h": visit.moor_h,
                            "terminal": visit.terminal,
                            "anchor_rate_deg_h": visit.anchor_rate_deg_h,
                        }
                        for visit in v.visits
                    ],
                }
                for v in self.vessels
            ],
            "outages": [
                {
                    "scope": o.scope,
                    "start": format_ts(o.start),
                    "end": format_ts(o.end),
                    "mmsi": o.mmsi,
                }
                for o in self.outages
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Scenario":
        return cls(
            seed=doc["seed"],
            center=tuple(doc.get("center", (34.45, 18.30))),
            error_p=doc.get("error_p", 0.0),
            cadence_underway_s=doc.get("cadence_underway_s", 10),
            cadence_stopped_s=doc.get("cadence_stopped_s", 180),
            static_interval_s=doc.get("static_interval_s", 1800),
            vessels=tuple(
                VesselPlan(
                    mmsi=v["mmsi"],
                    name=v.get("name", f"VESSEL {v['mmsi']}"),
                    ship_type=v.get("ship_type", 70),
                    cruise_kn=v.get("cruise_kn", 11.0),
                    visits=tuple(
                        VisitPlan(
                            arrive=parse_ts(visit["arrive"]),
                            anchor_h=visit.get("anchor_h", 0.0),
                            moor_h=visit.get("moor_h", 12.0),
                            terminal=visit.get("terminal", 0),
                            anchor_rate_deg_h=visit.get("anchor_rate_deg_h"),
                        )
                        for visit in v["visits"]
                    ),
                )
                for v in doc["vessels"]
            ),
            outages=tuple(
                OutagePlan(
                    scope=o["scope"],
                    start=parse_ts(o["start"]),
                    end=parse_ts(o["end"]),
                    mmsi=o.get("mmsi"),
                )
                for o in doc.get("outages", ())
            ),
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json_dict(json.load(f))


@dataclass(frozen=True)
class TruthPhase:
    mmsi: int
    kind: str  # "underway" | "anchored" | "moored"
    start: dt.datetime
    end: dt.datetime

    @property
    def duration(self) -> dt.timedelta:
        return self.end - self.start


@dataclass
class TruthLog:
    """Ground truth emitted alongside the NMEA stream."""

    vessels: dict[int, dict] = field(default_factory=dict)
    phases: list[TruthPhase] = field(default_factory=list)
    arrivals: dict[dt.date, dict[str, int]] = field(default_factory=dict)
    outages: list[OutagePlan] = field(default_factory=list)

    def status_at(self, mmsi: int, ts: dt.datetime) -> int | None:
        """True status of a vessel at an instant, None outside any phase."""
        kind_to_status = {"underway": UNDERWAY, "anchored": ANCHORED, "moored": MOORED}
        for p in self.phases:
            if p.mmsi == mmsi and p.start <= ts < p.end:
                return kind_to_status[p.kind]
        return None

    def stop_phases(self, min_hours: float = 0.0) -> list[TruthPhase]:
        floor = dt.timedelta(hours=min_hours)
        return [p for p in self.phases if p.kind in ("anchored", "moored") and p.duration >= floor]

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for mmsi in sorted(self.vessels):
                doc = {"kind": "vessel", "mmsi": mmsi, **self.vessels[mmsi]}
                f.write(json.dumps(doc, sort_keys=True) + "\n")
            for p in self.phases:
                doc = {
                    "kind": "phase",
                    "mmsi": p.mmsi,
                    "phase": p.kind,
                    "start": format_ts(p.start),
                    "end": format_ts(p.end),
                }
                f.write(json.dumps(doc, sort_keys=True) + "\n")
            for date in sorted(self.arrivals):
                for cat, count in sorted(self.arrivals[date].items()):
                    doc = {"kind": "arrival", "date": date.isoformat(), "category": cat, "count": count}
                    f.write(json.dumps(doc, sort_keys=True) + "\n")
            for o in self.outages:
                doc = {
                    "kind": "outage",
                    "scope": o.scope,
                    "start": format_ts(o.start),
                    "end": format_ts(o.end),
                    "mmsi": o.mmsi,
                }
                f.write(json.dumps(doc, sort_keys=True) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "TruthLog":
        truth = cls()
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                doc = json.loads(line)
                kind = doc.pop("kind")
                if kind == "vessel":
                    mmsi = doc.pop("mmsi")
                    truth.vessels[mmsi] = doc
                elif kind == "phase":
                    truth.phases.append(
                        TruthPhase(
                            mmsi=doc["mmsi"],
                            kind=doc["phase"],
                            start=parse_ts(doc["start"]),
                            end=parse_ts(doc["end"]),
                        )
                    )
                elif kind == "arrival":
                    date = dt.date.fromisoformat(doc["date"])
                    truth.arrivals.setdefault(date, {})[doc["category"]] = doc["count"]
                elif kind == "outage":
                    truth.outages.append(
                        OutagePlan(
                            scope=doc["scope"],
                            start=parse_ts(doc["start"]),
                            end=parse_ts(doc["end"]),
                            mmsi=doc.get("mmsi"),
                        )
                    )
        return truth


# ---------------------------------------------------------------------------
# AIS encoding (production side; the test suite keeps its own encoder)


def _pack(fields: Iterable[tuple[int, int]]) -> str:
    return "".join(format(value & ((1 << width) - 1), f"0{width}b") for value, width in fields)


def _armor(bitstr: str) -> tuple[str, int]:
    fill = (6 - len(bitstr) % 6) % 6
    bitstr += "0" * fill
    payload = "".join(ARMOR_ALPHABET[int(bitstr[i : i + 6], 2)] for i in range(0, len(bitstr), 6))
    return payload, fill


def _sentence(payload: str, fill: int, frag_count: int = 1, frag_index: int = 1, message_id: int | None = None) -> str:
    mid = "" if message_id is None else str(message_id)
    body = f"AIVDM,{frag_count},{frag_index},{mid},A,{payload},{fill}"
    return f"!{body}*{nmea_checksum(body):02X}"


def _tagged(line: str, ts: dt.datetime) -> str:
    tag = f"c:{int(ts.timestamp())}"
    return f"\\{tag}*{nmea_checksum(tag):02X}\\{line}"


def encode_position_line(
    ts: dt.datetime,
    mmsi: int,
    navstat: int,
    sog_kn: float | None,
    lat: float,
    lon: float,
    cog_deg: float | None,
    heading_deg: float | None,
    rot: int | None = 0,
) -> str:
    """Build one tag-blocked type 1 position report sentence."""
    sog_raw = 1023 if sog_kn is None else max(0, min(1022, round(sog_kn * 10)))
    cog_raw = 3600 if cog_deg is None else round(cog_deg * 10) % 3600
    hdg_raw = 511 if heading_deg is None else round(heading_deg) % 360
    rot_raw = -128 if rot is None else max(-126, min(126, rot))
    bits = _pack(
        [
            (1, 6),  # message type
            (0, 2),  # repeat indicator
            (mmsi, 30),
            (navstat, 4),
            (rot_raw, 8),
            (sog_raw, 10),
            (0, 1),  # position accuracy
            (round(lon * 600000), 28),
            (round(lat * 600000), 27),
            (cog_raw, 12),
            (hdg_raw, 9),
            (ts.second, 6),
            (0, 2),  # maneuver indicator
            (0, 3),  # spare
            (0, 1),  # RAIM
            (0, 19),  # radio status
        ]
    )
    payload, fill = _armor(bits)
    return _tagged(_sentence(payload, fill), ts)


def _sixbit_value(ch: str) -> int:
    o = ord(ch.upper())
    if 64 <= o <= 95:
        return o - 64
    if 32 <= o <= 63:
        return o
    return 0  # unrepresentable characters become '@' padding


def encode_static_lines(ts: dt.datetime, mmsi: int, name: str, ship_type: int, message_id: int) -> list[str]:
    """Build a two-sentence type 5 static report (name, ship type, dims)."""
    name_bits = []
    padded = (name[:20] + "@" * 20)[:20]
    for ch in padded:
        name_bits.append((_sixbit_value(ch), 6))
    bits = _pack(
        [
            (5, 6),  # message type
            (0, 2),
            (mmsi, 30),
            (0, 2),  # AIS version
            (0, 30),  # IMO
            *[(_sixbit_value(ch), 6) for ch in ("@" * 7)],  # call sign
            *name_bits,
            (ship_type, 8),
            (60, 9),  # to bow
            (60, 9),  # to stern
            (10, 6),  # to port
            (10, 6),  # to starboard
            (1, 4),  # EPFD
            (0, 20),  # ETA
            (0, 8),  # draught
            *[(_sixbit_value(ch), 6) for ch in ("@" * 20)],  # destination
            (0, 1),  # DTE
            (0, 1),  # spare
        ]
    )
    payload, fill = _armor(bits)
    split = 36
    first = _sentence(payload[:split], 0, frag_count=2, frag_index=1, message_id=message_id)
    second = _sentence(payload[split:], fill, frag_count=2, frag_index=2, message_id=message_id)
    return [_tagged(first, ts), _tagged(second, ts)]


# ---------------------------------------------------------------------------
# track generation


def leg_seconds(a: tuple[float, float], b: tuple[float, float], speed_kn: float) -> int:
    """Whole-second duration of a straight leg at the given speed."""
    meters = _dist_m(a, b)
    mps = speed_kn * 0.514444
    return max(1, math.ceil(meters / mps))


def _lerp(a: tuple[float, float], b: tuple[float, float], f: float) -> tuple[float, float]:
    return (a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f)


class _Emitter:
    """Collects (epoch, sequence, line) triples and applies outage drops."""

    def __init__(self, scenario: Scenario, rng: random.Random):
        self.scenario = scenario
        self.rng = rng
        self.events: list[tuple[int, int, str]] = []
        self._seq = 0

    def _dropped(self, ts: dt.datetime, mmsi: int) -> bool:
        for o in self.scenario.outages:
            if not (o.start <= ts < o.end):
                continue
            if o.scope == "global":
                return True
            if o.scope == "vessel" and o.mmsi == mmsi:
                return True
        return False

    def position(self, ts: dt.datetime, vessel: VesselPlan, true_status: int, sog, lat, lon, cog, heading):
        reported = true_status
        if self.scenario.error_p > 0 and self.rng.random() < self.scenario.error_p:
            others = [s for s in (UNDERWAY, ANCHORED, MOORED) if s != true_status]
            reported = self.rng.choice(others)
        if self._dropped(ts, vessel.mmsi):
            return
        line = encode_position_line(ts, vessel.mmsi, reported, sog, lat, lon, cog, heading)
        self.events.append((int(ts.timestamp()), self._seq, line))
        self._seq += 1

    def static(self, ts: dt.datetime, vessel: VesselPlan):
        if self._dropped(ts, vessel.mmsi):
            return
        message_id = vessel.mmsi % 10
        for line in encode_static_lines(ts, vessel.mmsi, vessel.name, vessel.ship_type, message_id):
            self.events.append((int(ts.timestamp()), self._seq, line))
            self._seq += 1


def _random_point_in_box(rng: random.Random, box, margin: float = 0.8) -> tuple[float, float]:
    (clat, clon), height, width = box
    north = rng.uniform(-height / 2 * margin, height / 2 * margin)
    east = rng.uniform(-width / 2 * margin, width / 2 * margin)
    return _offset(clat, clon, north, east)


def _generate_visit(
    emitter: _Emitter,
    truth: TruthLog,
    layout: PortLayout,
    vessel: VesselPlan,
    visit: VisitPlan,
    rng: random.Random,
) -> None:
    scenario = emitter.scenario
    berth = layout.berths[visit.terminal % len(layout.berths)]
    berth_pos = (berth[0], berth[1])
    anchor_spot = _random_point_in_box(rng, layout.anchorage_box) if visit.anchor_h > 0 else None

    # waypoint schedule, whole seconds throughout
    t = visit.arrive.replace(microsecond=0)
    segments: list[tuple[str, dt.datetime, dt.datetime, tuple, tuple]] = []
    pos = layout.entry
    if anchor_spot is not None:
        t_leg = dt.timedelta(seconds=leg_seconds(pos, anchor_spot, vessel.cruise_kn))
        segments.append(("underway", t, t + t_leg, pos, anchor_spot))
        t += t_leg
        t_anchor = dt.timedelta(seconds=round(visit.anchor_h * 3600))
        segments.append(("anchored", t, t + t_anchor, anchor_spot, anchor_spot))
        t += t_anchor
        pos = anchor_spot
    t_leg = dt.timedelta(seconds=leg_seconds(pos, berth_pos, vessel.cruise_kn))
    segments.append(("underway", t, t + t_leg, pos, berth_pos))
    t += t_leg
    t_moor = dt.timedelta(seconds=round(visit.moor_h * 3600))
    segments.append(("moored", t, t + t_moor, berth_pos, berth_pos))
    t += t_moor
    t_leg = dt.timedelta(seconds=leg_seconds(berth_pos, layout.exit, vessel.cruise_kn))
    segments.append(("underway", t, t + t_leg, berth_pos, layout.exit))
    t += t_leg

    for kind, start, end, _, _ in segments:
        if end > start:
            truth.phases.append(TruthPhase(vessel.mmsi, kind, start, end))
    date = visit.arrive.date()
    category = vessel_category(vessel.ship_type)
    truth.arrivals.setdefault(date, {})
    truth.arrivals[date][category] = truth.arrivals[date].get(category, 0) + 1

    anchor_heading = rng.uniform(0.0, 360.0)
    rate = visit.anchor_rate_deg_h
    if rate is None:
        rate = rng.uniform(10.0, 60.0)
    rate *= rng.choice((-1.0, 1.0))
    next_static = visit.arrive.replace(microsecond=0)

    for kind, start, end, p_from, p_to in segments:
        cadence = scenario.cadence_underway_s if kind == "underway" else scenario.cadence_stopped_s
        total = (end - start).total_seconds()
        ts = start
        while ts < end:
            if next_static <= ts:
                emitter.static(ts, vessel)
                next_static = ts + dt.timedelta(seconds=scenario.static_interval_s)
            if kind == "underway":
                f = (ts - start).total_seconds() / total
                lat, lon = _lerp(p_from, p_to, f)
                bearing = _bearing_deg(p_from, p_to)
                sog = vessel.cruise_kn + rng.uniform(-0.4, 0.4)
                heading = (bearing + rng.uniform(-1.5, 1.5)) % 360.0
                emitter.position(ts, vessel, UNDERWAY, sog, lat, lon, bearing, heading)
            elif kind == "anchored":
                lat, lon = _offset(
                    p_from[0], p_from[1], rng.uniform(-25.0, 25.0), rng.uniform(-25.0, 25.0)
                )
                elapsed_h = (ts - start).total_seconds() / 3600.0
                heading = (anchor_heading + rate * elapsed_h + rng.uniform(-1.5, 1.5)) % 360.0
                sog = rng.uniform(0.0, 0.25)
                emitter.position(ts, vessel, ANCHORED, sog, lat, lon, heading, heading)
            else:  # moored
                lat, lon = _offset(p_from[0], p_from[1], rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0))
                heading = (berth[2] + rng.uniform(-2.0, 2.0)) % 360.0
                emitter.position(ts, vessel, MOORED, 0.0, lat, lon, heading, heading)
            ts += dt.timedelta(seconds=cadence)


def generate(scenario: Scenario) -> tuple[list[str], TruthLog]:
    """Produce the NMEA line stream and its truth log.

    Deterministic for a given scenario: running twice yields byte-identical
    lines.
    """
    rng = random.Random(scenario.seed)
    layout = build_port(scenario.center)
    truth = TruthLog(outages=list(scenario.outages))
    emitter = _Emitter(scenario, rng)
    for vessel in scenario.vessels:
        truth.vessels[vessel.mmsi] = {
            "name": vessel.name,
            "ship_type": vessel.ship_type,
            "category": vessel_category(vessel.ship_type),
        }
        for visit in vessel.visits:
            _generate_visit(emitter, truth, layout, vessel, visit, rng)
    emitter.events.sort(key=lambda e: (e[0], e[1]))
    truth.phases.sort(key=lambda p: (p.mmsi, p.start))
    return [line for _, _, line in emitter.events], truth


# ---------------------------------------------------------------------------
# preset scenarios


_SHIP_TYPES = (70, 74, 80, 82, 60, 64, 70, 89, 52, 60)


def mixed_port_scenario(
    *,
    n_vessels: int = 10,
    days: int = 3,
    error_p: float = 0.3,
    seed: int = 7,
    start: dt.datetime = dt.datetime(2019, 9, 1, tzinfo=UTC),
    outages: tuple[OutagePlan, ...] = (),
) -> Scenario:
    """A port with staggered arrivals across vessel categories.

    Anchorage stops, when present, last at least 3.5 h so rotation has time
    to show; berth stays run 8-16 h like typical cargo calls.
    """
    rng = random.Random(seed * 7919 + 13)
    vessels = []
    horizon = start + dt.timedelta(days=days)
    for i in range(n_vessels):
        mmsi = 219000001 + i
        ship_type = _SHIP_TYPES[i % len(_SHIP_TYPES)]
        cruise = rng.uniform(9.0, 13.5)
        visits = []
        t = start + dt.timedelta(hours=rng.uniform(0.0, 12.0))
        while t < horizon - dt.timedelta(hours=22):
            anchors = rng.random() < 0.7
            anchor_h = rng.uniform(3.5, 8.0) if anchors else 0.0
            moor_h = rng.uniform(8.0, 16.0)
            visits.append(
                VisitPlan(
                    arrive=t.replace(microsecond=0),
                    anchor_h=anchor_h,
                    moor_h=moor_h,
                    terminal=rng.randrange(2),
                )
            )
            away_h = rng.uniform(6.0, 14.0)
            t += dt.timedelta(hours=anchor_h + moor_h + 2.0 + away_h)
        if not visits:
            visits.append(VisitPlan(arrive=start + dt.timedelta(hours=i), anchor_h=4.0, moor_h=10.0))
        vessels.append(
            VesselPlan(
                mmsi=mmsi,
                name=f"TESTBED {i + 1}",
                ship_type=ship_type,
                cruise_kn=cruise,
                visits=tuple(visits),
            )
        )
    return Scenario(seed=seed, vessels=tuple(vessels), error_p=error_p, outages=outages)


def ferry_scenario(
    *,
    days: int = 10,
    skip_departure_day: int | None = 4,
    error_p: float = 0.0,
    seed: int = 3,
    start: dt.datetime = dt.datetime(2019, 9, 9, tzinfo=UTC),
) -> Scenario:
    """A high-speed ferry on a fixed daily rotation.

    Arrives early afternoon, departs 04:20 the next morning. Optionally one
    departure is skipped, so that stay runs a full day longer, which is the
    signature a schedule table should surface.
    """
    rng = random.Random(seed)
    layout = build_port()
    berth = layout.berths[0]
    approach_s = leg_seconds(layout.entry, (berth[0], berth[1]), 27.0)
    visits = []
    day = start.date()
    d = 0
    while d < days:
        arrive = dt.datetime.combine(day, dt.time(13, 50), tzinfo=UTC) + dt.timedelta(
            days=d, minutes=rng.randint(-8, 8)
        )
        moor_start = arrive + dt.timedelta(seconds=approach_s)
        depart_days = 2 if d == skip_departure_day else 1
        depart = dt.datetime.combine(day, dt.time(4, 20), tzinfo=UTC) + dt.timedelta(
            days=d + depart_days, minutes=rng.randint(-3, 3)
        )
        moor_h = (depart - moor_start).total_seconds() / 3600.0
        visits.append(VisitPlan(arrive=arrive, anchor_h=0.0, moor_h=moor_h, terminal=0))
        d += depart_days
    ferry = VesselPlan(
        mmsi=219000777,
        name="HIGHSPEED TEST",
        ship_type=60,
        cruise_kn=27.0,
        visits=tuple(visits),
    )
    return Scenario(seed=seed, vessels=(ferry,), error_p=error_p)
