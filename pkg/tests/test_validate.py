import datetime as dt
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from portcall import validate
from portcall.codec import PositionReport
from portcall.geo import PortGeometry, Polygon, UnavailableHeading

UTC = dt.timezone.utc
T0 = dt.datetime(2019, 9, 1, tzinfo=UTC)

TERMINAL = Polygon("berth", "terminal", ((10.00, 20.00), (10.00, 20.02), (10.01, 20.02), (10.01, 20.00)))
ANCHORAGE = Polygon("roads", "anchorage", ((9.95, 20.00), (9.95, 20.04), (9.98, 20.04), (9.98, 20.00)))
PORT = PortGeometry(anchorages=(ANCHORAGE,), terminals=(TERMINAL,))

TERMINAL_MID = (10.005, 20.01)
ANCHORAGE_MID = (9.965, 20.02)


def report(ts=T0, mmsi=219000001, lat=10.005, lon=20.01, sog=0.0, heading=90.0, navstat=0, cog=None, rot=0):
    return PositionReport(mmsi=mmsi, timestamp=ts, lat=lat, lon=lon, sog=sog,
                          cog=cog, heading=heading, navstat=navstat, rot=rot)


class TestIsStopped:
    def test_zero_speed(self):
        assert validate.is_stopped(report(sog=0.0))

    def test_moving(self):
        assert not validate.is_stopped(report(sog=12.3))

    def test_threshold_is_strict(self):
        assert not validate.is_stopped(report(sog=0.5), 0.5)
        assert validate.is_stopped(report(sog=0.499), 0.5)

    def test_unavailable(self):
        with pytest.raises(validate.UnavailableSpeed):
            validate.is_stopped(report(sog=None))


class TestGeofence:
    def test_stopped_at_terminal_is_moored(self):
        assert validate.classify_geofence(report(lat=TERMINAL_MID[0], lon=TERMINAL_MID[1], sog=0.1), PORT) == 5

    def test_stopped_in_anchorage_is_anchored(self):
        assert validate.classify_geofence(report(lat=ANCHORAGE_MID[0], lon=ANCHORAGE_MID[1], sog=0.1), PORT) == 1

    def test_moving_anywhere_is_underway(self):
        assert validate.classify_geofence(report(lat=TERMINAL_MID[0], lon=TERMINAL_MID[1], sog=10.0), PORT) == 0

    def test_stopped_outside_polygons_is_underway(self):
        assert validate.classify_geofence(report(lat=9.90, lon=20.1, sog=0.0), PORT) == 0

    def test_never_moored_outside_terminal(self):
        rng = random.Random(5)
        for _ in range(200):
            lat = 9.9 + rng.random() * 0.2
            lon = 19.95 + rng.random() * 0.15
            out = validate.classify_geofence(report(lat=lat, lon=lon, sog=0.0), PORT)
            if out == 5:
                assert TERMINAL.contains(lat, lon)
            if out == 1:
                assert ANCHORAGE.contains(lat, lon)


def stopped_window(hours, heading_fn, cadence_s=180, sog=0.1, start=T0):
    msgs = []
    n = int(hours * 3600 // cadence_s) + 1
    for i in range(n):
        ts = start + dt.timedelta(seconds=i * cadence_s)
        msgs.append(report(ts=ts, sog=sog, heading=heading_fn(i * cadence_s / 3600.0)))
    return msgs


class TestKinematic:
    def test_constant_heading_is_moored(self):
        window = stopped_window(6.0, lambda h: 45.0)
        assert validate.classify_kinematic(window) == 5

    def test_sweeping_heading_is_anchored(self):
        # full sweep 0..350 over six hours has a resultant length near zero
        window = stopped_window(6.0, lambda h: (h / 6.0) * 350.0)
        assert validate.classify_kinematic(window) == 1

    def test_moving_is_underway(self):
        window = stopped_window(6.0, lambda h: 45.0)
        window.append(report(ts=window[-1].timestamp + dt.timedelta(seconds=10), sog=8.0))
        assert validate.classify_kinematic(window) == 0

    def test_short_window_insufficient(self):
        window = stopped_window(1.0, lambda h: 45.0)
        with pytest.raises(validate.InsufficientWindow):
            validate.classify_kinematic(window)

    def test_missing_headings(self):
        window = stopped_window(6.0, lambda h: 45.0)
        for i, m in enumerate(window):
            if i % 3:
                m.heading = None  # only a third of samples carry a heading
        with pytest.raises(UnavailableHeading):
            validate.classify_kinematic(window)

    def test_rotation_offset_invariance(self):
        # adding a constant offset to every heading cannot change the call
        for rate in (20.0, 58.0):
            base = stopped_window(4.0, lambda h, r=rate: (r * h) % 360.0)
            out_base = validate.classify_kinematic(base)
            for offset in (37.0, 180.0, 301.0):
                shifted = stopped_window(4.0, lambda h, r=rate, o=offset: (r * h + o) % 360.0)
                assert validate.classify_kinematic(shifted) == out_base

    def test_threshold_matches_resultant_length(self):
        # window spread just under/over the 0.98 resultant-length threshold
        w_tight = stopped_window(3.5, lambda h: (h * 8.0) % 360.0)   # 28 deg arc -> R > 0.98
        w_loose = stopped_window(3.5, lambda h: (h * 20.0) % 360.0)  # 70 deg arc -> R < 0.98
        assert validate.classify_kinematic(w_tight) == 5
        assert validate.classify_kinematic(w_loose) == 1


def two_cluster_reports(n_per=500, seed=1):
    """Anchorage cluster labelled 1 around (9.965, 20.02), terminal cluster labelled 5."""
    rng = random.Random(seed)
    reports = []
    for _ in range(n_per):
        reports.append(report(lat=ANCHORAGE_MID[0] + rng.uniform(-0.01, 0.01),
                              lon=ANCHORAGE_MID[1] + rng.uniform(-0.01, 0.01),
                              sog=0.1, navstat=1))
        reports.append(report(lat=TERMINAL_MID[0] + rng.uniform(-0.003, 0.003),
                              lon=TERMINAL_MID[1] + rng.uniform(-0.003, 0.003),
                              sog=0.0, navstat=5))
    return reports


class TestKnn:
    def test_unanimous_labels(self):
        reports = [report(lat=10.0 + i * 1e-5, lon=20.0, sog=0.1, navstat=5) for i in range(400)]
        model = validate.fit_knn(reports, k=300)
        assert validate.classify_knn(model, report(lat=10.001, lon=20.0, sog=0.1)) == 5

    def test_too_few_points(self):
        reports = [report(sog=0.1, navstat=1)] * 10
        with pytest.raises(validate.TooFewPoints):
            validate.fit_knn(reports, k=300)

    def test_moving_training_points_excluded(self):
        moving = [report(sog=9.0, navstat=1)] * 500
        with pytest.raises(validate.TooFewPoints):
            validate.fit_knn(moving, k=100)

    def test_wrong_status_training_points_excluded(self):
        odd = [report(sog=0.1, navstat=3)] * 500
        with pytest.raises(validate.TooFewPoints):
            validate.fit_knn(odd, k=100)

    def test_two_clusters_k300(self):
        model = validate.fit_knn(two_cluster_reports(), k=300)
        assert validate.classify_knn(model, report(lat=ANCHORAGE_MID[0], lon=ANCHORAGE_MID[1], sog=0.2)) == 1
        assert validate.classify_knn(model, report(lat=TERMINAL_MID[0], lon=TERMINAL_MID[1], sog=0.2)) == 5

    def test_moving_query_is_underway(self):
        model = validate.fit_knn(two_cluster_reports(n_per=200), k=50)
        assert validate.classify_knn(model, report(sog=11.0)) == 0

    def test_matches_brute_force_scan(self):
        rng = random.Random(42)
        for trial in range(20):
            n = rng.randrange(50, 800)
            k = rng.choice([1, 7, 50, min(300, n)])
            reports = []
            for _ in range(n):
                reports.append(report(lat=10.0 + rng.uniform(-0.05, 0.05),
                                      lon=20.0 + rng.uniform(-0.05, 0.05),
                                      sog=0.0, navstat=rng.choice([1, 5])))
            model = validate.fit_knn(reports, k=k)
            xy = [tuple(p) for p in model.xy]
            labels = list(model.labels)
            for _ in range(10):
                q = report(lat=10.0 + rng.uniform(-0.06, 0.06), lon=20.0 + rng.uniform(-0.06, 0.06), sog=0.1)
                from portcall.geo import _project_unchecked
                qx, qy = _project_unchecked(model.origin[0], model.origin[1], q.lat, q.lon)
                assert validate.classify_knn(model, q) == oracles.brute_knn(xy, labels, k, qx, qy)

    def test_ties_match_brute_force_on_duplicate_points(self):
        # duplicated training points force exact distance ties at the kth slot
        reports = []
        for i in range(40):
            reports.append(report(lat=10.0, lon=20.0, sog=0.0, navstat=1 if i % 2 else 5))
            reports.append(report(lat=10.001, lon=20.0, sog=0.0, navstat=5))
        model = validate.fit_knn(reports, k=30)
        xy = [tuple(p) for p in model.xy]
        labels = list(model.labels)
        from portcall.geo import _project_unchecked
        for qlat in (10.0, 10.0004, 10.0006, 10.001):
            q = report(lat=qlat, lon=20.0, sog=0.1)
            qx, qy = _project_unchecked(model.origin[0], model.origin[1], q.lat, q.lon)
            assert validate.classify_knn(model, q) == oracles.brute_knn(xy, labels, 30, qx, qy)


def cadence_stream(mmsi, start, minutes, step_s=60, lat=10.005, lon=20.01, sog=0.0):
    return [report(mmsi=mmsi, ts=start + dt.timedelta(seconds=i * step_s), lat=lat, lon=lon, sog=sog)
            for i in range(int(minutes * 60 // step_s))]


class TestOutages:
    def test_continuous_stream_is_clean(self):
        msgs = cadence_stream(1, T0, minutes=120)
        assert validate.detect_outages(msgs) == []

    def test_global_hole(self):
        msgs = cadence_stream(1, T0, minutes=60)
        msgs += cadence_stream(1, T0 + dt.timedelta(hours=3), minutes=60)
        out = validate.detect_outages(msgs)
        globals_ = [o for o in out if o.scope == "global"]
        assert len(globals_) == 1
        assert globals_[0].duration == dt.timedelta(hours=2, minutes=1)

    def test_trailing_global_hole_against_now(self):
        msgs = cadence_stream(1, T0, minutes=30)
        out = validate.detect_outages(msgs, now=T0 + dt.timedelta(hours=2))
        assert any(o.scope == "global" and o.end == T0 + dt.timedelta(hours=2) for o in out)

    def test_single_vessel_silence(self):
        # two vessels share a berth cell; one goes silent for three hours
        busy = cadence_stream(1, T0, minutes=360, step_s=120)
        quiet = cadence_stream(2, T0, minutes=60, step_s=120, lat=10.0051, lon=20.0101)
        quiet += cadence_stream(2, T0 + dt.timedelta(hours=4), minutes=60, step_s=120,
                                lat=10.0051, lon=20.0101)
        out = validate.detect_outages(busy + quiet)
        vessel = [o for o in out if o.scope == "vessel"]
        assert len(vessel) == 1
        assert vessel[0].subject == 2
        assert not [o for o in out if o.scope == "global"]

    def test_area_outage_needs_other_traffic(self):
        # cell A is busy then dark for two hours while cell B keeps reporting
        cell_a = cadence_stream(1, T0, minutes=60, lat=10.005, lon=20.01)
        cell_a += cadence_stream(1, T0 + dt.timedelta(hours=3), minutes=60, lat=10.005, lon=20.01)
        cell_b = cadence_stream(2, T0, minutes=300, lat=11.5, lon=21.5)
        out = validate.detect_outages(cell_a + cell_b)
        assert any(o.scope == "area" for o in out)

    def test_sparse_vessel_not_an_outage(self):
        # 30-minute cadence never qualifies as dense reporting
        msgs = [report(mmsi=1, ts=T0 + dt.timedelta(minutes=30 * i)) for i in range(20)]
        msgs += cadence_stream(2, T0, minutes=600)
        assert [o for o in validate.detect_outages(msgs) if o.scope == "vessel"] == []


class TestHysteresis:
    def run(self, candidates, cadence_s=180, min_msgs=2, min_minutes=10.0):
        times = [T0 + dt.timedelta(seconds=i * cadence_s) for i in range(len(candidates))]
        return validate._apply_hysteresis(list(candidates), times, min_msgs, min_minutes)

    def test_clean_stream_unchanged(self):
        seq = [0, 0, 0, 1, 1, 1, 5, 5, 5, 0, 0]
        assert self.run(seq) == seq

    def test_single_message_blip_suppressed(self):
        assert self.run([1, 1, 1, 5, 1, 1]) == [1, 1, 1, 1, 1, 1]

    def test_two_message_change_accepted_retroactively(self):
        assert self.run([1, 1, 5, 5, 5, 5]) == [1, 1, 5, 5, 5, 5]

    def test_alternating_noise_suppressed(self):
        assert self.run([1, 0, 1, 0, 1, 0, 1]) == [1, 1, 1, 1, 1, 1, 1]

    def test_time_rule_with_sparse_cadence(self):
        # a single confirming pair 12 minutes apart crosses the 10-minute rule
        out = self.run([1, 1, 5, 5], cadence_s=720, min_msgs=5)
        assert out == [1, 1, 5, 5]

    def test_trailing_blip_suppressed(self):
        assert self.run([1, 1, 1, 1, 5]) == [1, 1, 1, 1, 1]


class TestValidateStream:
    def test_moored_while_moving_corrected(self):
        msgs = [report(ts=T0 + dt.timedelta(seconds=10 * i), sog=14.0, navstat=5, lat=10.05 + i * 1e-4)
                for i in range(10)]
        out = validate.validate_stream(msgs, PORT, validate.ValidationConfig(method="geofence"))
        assert all(vm.corrected_navstat == 0 for vm in out)
        assert not any(vm.agreed_with_reported for vm in out)

    def test_border_oscillation_is_one_interval(self):
        # anchored vessel drifting on the polygon border: single-message
        # excursions outside must not flap the corrected status
        inside = (9.9505, 20.02)
        outside = (9.9495, 20.02)
        msgs = []
        for i in range(40):
            spot = outside if i % 4 == 3 else inside
            msgs.append(report(ts=T0 + dt.timedelta(seconds=180 * i), lat=spot[0], lon=spot[1],
                               sog=0.1, navstat=1))
        out = validate.validate_stream(msgs, PORT, validate.ValidationConfig(method="geofence"))
        assert {vm.corrected_navstat for vm in out} == {1}

    def test_all_correct_stream_reproduced(self, clean_scenario, port_layout):
        from conftest import decode_all
        _, lines, _ = clean_scenario
        positions, _, _ = decode_all(lines)
        out = validate.validate_stream(positions, port_layout.geometry, validate.ValidationConfig())
        assert all(vm.corrected_navstat == vm.report.navstat for vm in out)
        assert all(vm.agreed_with_reported for vm in out)

    def test_deterministic_output(self, mixed_positions, port_layout):
        positions, _ = mixed_positions
        cfg = validate.ValidationConfig()
        a = validate.validate_stream(positions, port_layout.geometry, cfg)
        b = validate.validate_stream(list(reversed(positions)), port_layout.geometry, cfg)
        assert a == b

    def test_never_drops_messages(self, mixed_positions, port_layout):
        positions, _ = mixed_positions
        out = validate.validate_stream(positions, port_layout.geometry, validate.ValidationConfig())
        assert len(out) == len(positions)
        assert all(vm.corrected_navstat in (0, 1, 5) for vm in out)
        assert all(vm.method in ("geofence", "kinematic", "knn", "reported") for vm in out)

    def test_speed_unavailable_falls_back_to_reported(self):
        msgs = [report(ts=T0 + dt.timedelta(seconds=180 * i), sog=None, navstat=1) for i in range(5)]
        out = validate.validate_stream(msgs, PORT, validate.ValidationConfig(method="geofence"))
        assert all(vm.corrected_navstat == 1 for vm in out)
        assert all(vm.method == "reported" for vm in out)

    def test_unknown_reported_status_falls_back_to_underway(self):
        msgs = [report(ts=T0 + dt.timedelta(seconds=180 * i), sog=None, navstat=15) for i in range(5)]
        out = validate.validate_stream(msgs, None, validate.ValidationConfig(method="kinematic"))
        assert all(vm.corrected_navstat == 0 for vm in out)

    def test_gap_flag_set_after_vessel_outage(self):
        msgs = cadence_stream(1, T0, minutes=60, step_s=120)
        msgs += cadence_stream(1, T0 + dt.timedelta(hours=4), minutes=60, step_s=120)
        msgs += cadence_stream(2, T0, minutes=360, step_s=120, lat=10.0, lon=20.0)
        out = validate.validate_stream(msgs, PORT, validate.ValidationConfig(method="geofence"))
        flagged = [vm for vm in out if vm.gap_flag]
        assert len(flagged) == 1
        assert flagged[0].report.mmsi == 1
        assert flagged[0].report.timestamp == T0 + dt.timedelta(hours=4)


class TestConfig:
    def test_defaults(self):
        cfg = validate.ValidationConfig()
        assert cfg.method == "ensemble"
        assert cfg.stopped_threshold_kn == 0.5
        assert cfg.knn_k == 300
        assert cfg.rotation_window_h == 3.0
        assert cfg.rotation_rbar == 0.98
        assert cfg.hysteresis_msgs == 2
        assert cfg.hysteresis_min == 10.0

    def test_from_file(self, tmp_path):
        path = tmp_path / "v.conf"
        path.write_text(
            "# validation settings\n"
            "method = kinematic\n"
            "stopped_threshold_kn = 0.4\n"
            "knn_k = 150\n"
            "rotation_window_h = 2.5\n"
            "rotation_rbar = 0.95\n"
            "hysteresis_msgs = 3\n"
            "hysteresis_min = 12\n"
        )
        cfg = validate.ValidationConfig.from_file(path)
        assert cfg.method == "kinematic"
        assert cfg.stopped_threshold_kn == 0.4
        assert cfg.knn_k == 150
        assert cfg.rotation_window_h == 2.5
        assert cfg.rotation_rbar == 0.95
        assert cfg.hysteresis_msgs == 3
        assert cfg.hysteresis_min == 12.0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "v.conf"
        path.write_text("stoped_threshold_kn = 0.4\n")
        with pytest.raises(ValueError):
            validate.ValidationConfig.from_file(path)

    def test_bad_method_rejected(self):
        with pytest.raises(ValueError):
            validate.ValidationConfig(method="catboost")


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_knn_oracle_equivalence_property(seed):
    rng = random.Random(seed)
    n = rng.randrange(30, 400)
    k = rng.choice([1, 5, 30, n])
    pts = [(rng.uniform(-3000, 3000), rng.uniform(-3000, 3000), rng.choice([1, 5])) for _ in range(n)]
    model = validate.KnnModel(
        k=k,
        origin=(10.0, 20.0),
        xy=np.array([(x, y) for x, y, _ in pts]),
        labels=np.array([l for _, _, l in pts], dtype=np.uint8),
    )
    q = report(sog=0.0, lat=10.0 + rng.uniform(-0.05, 0.05), lon=20.0 + rng.uniform(-0.05, 0.05))
    from portcall.geo import _project_unchecked
    qx, qy = _project_unchecked(10.0, 20.0, q.lat, q.lon)
    expected = oracles.brute_knn([(x, y) for x, y, _ in pts], [l for _, _, l in pts], k, qx, qy)
    assert validate.classify_knn(model, q) == expected
