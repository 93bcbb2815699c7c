import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isotraj import synth
from isotraj.errors import (
    EmptyInputError,
    IndeterminateHeadingError,
    InsufficientDataError,
    ParseError,
)
from isotraj.ingest import (
    ConstantSpeed,
    ProfileSpeed,
    RawSample,
    SensorSpec,
    counts_to_gauss,
    dead_reckon,
    detect_maneuver,
    format_log,
    heading_from_field,
    is_saturated,
    iter_samples,
    parse_log,
)


def fit_circle(xy):
    """Algebraic (Kasa) least-squares circle fit: returns centre and radius."""
    x, y = xy[:, 0], xy[:, 1]
    a = np.column_stack([x, y, np.ones_like(x)])
    b = x * x + y * y
    (c0, c1, c2), *_ = np.linalg.lstsq(a, b, rcond=None)
    cx, cy = c0 / 2, c1 / 2
    return (cx, cy), math.sqrt(c2 + cx * cx + cy * cy)


# -- parser ---------------------------------------------------------------------

def test_parse_two_samples():
    log = parse_log("timestamp_ms,mx,my\n0,512,0\n20,512,0")
    assert [s.timestamp for s in log] == [0, 20]
    assert log.samples[0] == RawSample(0, 512, 0)
    assert log.gaps == []


def test_parse_error_line_number():
    with pytest.raises(ParseError) as exc:
        parse_log("timestamp_ms,mx,my\n0,512,0\n20,abc,0\n")
    assert exc.value.line == 3


def test_gap_flag():
    log = parse_log("timestamp_ms,mx,my\n0,1,0\n20,1,0\n60,1,0\n")
    assert len(log) == 3
    assert len(log.gaps) == 1
    assert log.gaps[0].length_ms == 40 and log.gaps[0].line == 4


def test_empty_and_headerless():
    with pytest.raises(EmptyInputError):
        parse_log("")
    with pytest.raises(EmptyInputError):
        parse_log("# only a comment\n")
    with pytest.raises(ParseError):
        parse_log("0,1,2\n")


def test_non_monotonic_rejected():
    with pytest.raises(ParseError) as exc:
        parse_log("timestamp_ms,mx,my\n0,1,0\n20,1,0\n20,1,0\n")
    assert exc.value.line == 4


def test_wrong_field_count():
    with pytest.raises(ParseError):
        parse_log("timestamp_ms,mx,my\n0,1\n")


def test_comments_crlf_and_z_column():
    text = "# rig A\r\ntimestamp_ms,mx,my,z_m\r\n0,10,0,1.5\r\n# pause\r\n20,10,1,1.25\r\n"
    log = parse_log(text)
    assert log.has_z and log.samples[1].z_m == 1.25
    assert format_log(log) == text


def test_streaming_is_incremental():
    lines = iter(["timestamp_ms,mx,my\n", "0,1,0\n", "20,1,0\n", "oops\n"])
    it = iter_samples(lines)
    kinds = [next(it)[1] for _ in range(3)]
    assert kinds == ["header", "sample", "sample"]
    with pytest.raises(ParseError):
        next(it)


rows = st.lists(
    st.tuples(st.integers(1, 100), st.integers(-3000, 3000), st.integers(-3000, 3000)),
    min_size=0, max_size=30,
)


@pytest.mark.property
@given(rows, st.booleans(), st.booleans(), st.lists(st.text("abc xyz", max_size=8), max_size=3))
def test_round_trip_byte_identical(data, crlf, with_z, notes):
    nl = "\r\n" if crlf else "\n"
    lines = ["# " + n for n in notes[:1]]
    lines.append("timestamp_ms,mx,my,z_m" if with_z else "timestamp_ms,mx,my")
    t = 0
    for i, (dt, mx, my) in enumerate(data):
        t += dt
        row = f"{t},{mx},{my}"
        if with_z:
            row += f",{(i * 0.25)!r}"
        lines.append(row)
        if i == 1 and len(notes) > 1:
            lines.append("# " + notes[1])
    text = nl.join(lines) + nl
    assert format_log(parse_log(text)) == text


# -- conversion -------------------------------------------------------------------

def test_counts_to_gauss():
    assert counts_to_gauss(512) == 1.0
    assert counts_to_gauss(0) == 0.0
    assert counts_to_gauss(2560) == 5.0
    assert not is_saturated(2560)
    assert counts_to_gauss(3000) == 5.0 and is_saturated(3000)
    assert counts_to_gauss(-3000) == -5.0 and is_saturated(-3000)


def test_sensor_spec_bounds():
    SensorSpec(461)
    SensorSpec(563)
    with pytest.raises(ValueError):
        SensorSpec(460)


@pytest.mark.property
@given(st.integers(-1200, 1200), st.integers(-1200, 1200))
def test_counts_linear(a, b):
    assert abs(counts_to_gauss(a + b) - (counts_to_gauss(a) + counts_to_gauss(b))) < 1e-12


@pytest.mark.parametrize("mx, my, expected", [(1, 0, 0.0), (0, 1, 90.0), (-1, -1, 225.0), (1, -1, 315.0)])
def test_heading_from_field(mx, my, expected):
    assert heading_from_field(mx, my) == pytest.approx(expected)


def test_heading_zero_vector():
    with pytest.raises(IndeterminateHeadingError):
        heading_from_field(0.0, 0.0)


@pytest.mark.property
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_heading_range(mx, my):
    if mx == 0 and my == 0:
        return
    assert 0.0 <= heading_from_field(mx, my) < 360.0


# -- dead reckoning -----------------------------------------------------------------

def test_straight_line():
    pts = dead_reckon(synth.synth_log(synth.straight(3)).samples, speed_model=ConstantSpeed(1.0))
    np.testing.assert_allclose([p.position for p in pts], [[0, 0, 0], [0.02, 0, 0], [0.04, 0, 0]], atol=1e-15)
    assert [p.tick for p in pts] == [0, 1, 2]


def test_zero_speed_stays_put():
    pts = dead_reckon(synth.synth_log(synth.constant_turn(10, 5.0)).samples, speed_model=ConstantSpeed(0.0))
    assert all(np.array_equal(p.position, np.zeros(3)) for p in pts)


def test_constant_turn_circle():
    rate = 9.0
    pts = dead_reckon(synth.synth_log(synth.constant_turn(40, rate)).samples, speed_model=ConstantSpeed(1.0))
    _, radius = fit_circle(np.array([p.position[:2] for p in pts]))
    expected = 1.0 / (math.radians(rate) / 0.02)
    assert radius == pytest.approx(expected, rel=0.01)


def test_z_column_used():
    log = synth.synth_log(synth.straight(3), z=[1.0, 2.0, 3.0])
    assert [p.position[2] for p in dead_reckon(log.samples)] == [1.0, 2.0, 3.0]


def test_profile_speed():
    model = ProfileSpeed([0, 1000], [0.0, 10.0])
    assert model(500) == 5.0
    pts = dead_reckon(synth.synth_log(synth.straight(3)).samples, speed_model=model)
    assert pts[2].position[0] == pytest.approx((0.0 + 0.2) * 0.02)


def test_dead_reckon_needs_two():
    with pytest.raises(InsufficientDataError):
        dead_reckon(synth.synth_log([0.0]).samples)


@pytest.mark.property
@settings(max_examples=30)
@given(st.lists(st.floats(0, 359), min_size=2, max_size=60), st.floats(0, 13.9))
def test_path_length_conserved(headings, speed):
    pts = dead_reckon(synth.synth_log(headings).samples, speed_model=ConstantSpeed(speed))
    xy = np.array([p.position for p in pts])
    length = np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1))
    assert length == pytest.approx(speed * 0.02 * (len(pts) - 1), abs=1e-9)


# -- maneuvers ------------------------------------------------------------------------

N = 100
SPEEDS = np.full(N, 8.0)


@pytest.mark.parametrize("profile, label", [
    (synth.straight(N, 30.0), "straight"),
    (synth.lane_change(N, 8.0, 30.0), "left_lane_change"),
    (synth.lane_change(N, -8.0, 30.0), "right_lane_change"),
    (synth.turn(N, 90.0, 350.0), "left_turn"),
    (synth.turn(N, -90.0, 10.0), "right_turn"),
])
def test_maneuver_noise_free(profile, label):
    assert detect_maneuver(profile, SPEEDS) == label


def test_accel_decel():
    h = synth.straight(N)
    t = np.arange(N) * 0.02
    assert detect_maneuver(h, 5.0 + 2.0 * t) == "accel"
    assert detect_maneuver(h, 9.0 - 2.0 * t) == "decel"
    # Turn outranks acceleration.
    assert detect_maneuver(synth.turn(N, 90.0), 5.0 + 2.0 * t) == "left_turn"


def test_maneuver_short_window():
    with pytest.raises(InsufficientDataError):
        detect_maneuver(synth.straight(24), np.full(24, 8.0))


@pytest.mark.property
@given(st.sampled_from(["straight", "lane", "turn"]), st.floats(-20, 20), st.floats(0, 359),
       st.floats(-1, 1))
def test_mirror_swaps_sides(kind, amp, start, slope):
    profile = {
        "straight": synth.straight(N, start),
        "lane": synth.lane_change(N, amp, start),
        "turn": synth.turn(N, amp * 6, start),
    }[kind]
    speeds = 8.0 + slope * np.arange(N) * 0.02
    label = detect_maneuver(profile, speeds)
    mirrored = detect_maneuver(-np.asarray(profile), speeds)
    swap = {"left": "right", "right": "left"}
    side = label.split("_")[0]
    expected = label.replace(side, swap[side], 1) if side in swap else label
    assert mirrored == expected
