"""Sensor-log ingestion: HDMM01 counts -> heading -> dead-reckoned path.

Log format (UTF-8, LF or CRLF, ``#`` comment lines)::

    timestamp_ms,mx,my[,z_m]
    0,512,0
    20,511,9

``mx``/``my`` are raw integer counts on the two magnetic axes; the optional
``z_m`` column carries elevation in metres.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence, TextIO

import numpy as np

from .config import SensorConfig
from .errors import (
    EmptyInputError,
    IndeterminateHeadingError,
    InsufficientDataError,
    ParseError,
)

HEADER = ("timestamp_ms", "mx", "my")
HEADER_Z = HEADER + ("z_m",)
NOMINAL_PERIOD_MS = 20
MAX_SPEED_MPS = 13.9  # 50 km/h


@dataclass(frozen=True)
class RawSample:
    timestamp: int
    mx_counts: int
    my_counts: int
    z_m: Optional[float] = None


@dataclass(frozen=True)
class Gap:
    line: int
    after_ms: int
    before_ms: int

    @property
    def length_ms(self) -> int:
        return self.before_ms - self.after_ms


@dataclass
class SensorLog:
    samples: list
    gaps: list = field(default_factory=list)
    has_z: bool = False
    comments: list = field(default_factory=list)
    """``(n_samples_before, text)`` pairs, kept for byte-faithful rewriting."""
    newline: str = "\n"
    trailing_newline: bool = True

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


@dataclass(frozen=True)
class SensorSpec:
    sensitivity: float = 512.0
    range_gauss: float = 5.0
    accuracy_deg: float = 5.0
    noise_rms: float = 600e-6
    hard_iron: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not 461 <= self.sensitivity <= 563:
            raise ValueError(f"sensitivity {self.sensitivity} outside datasheet bounds 461..563")
        if not self.range_gauss > 0:
            raise ValueError("range must be positive")

    @classmethod
    def from_config(cls, cfg: SensorConfig) -> "SensorSpec":
        return cls(
            cfg.sensitivity,
            cfg.range_gauss,
            cfg.accuracy_deg,
            cfg.noise_rms_gauss,
            (cfg.hard_iron_x, cfg.hard_iron_y),
        )


@dataclass(frozen=True)
class PathPoint:
    tick: int
    position: np.ndarray
    heading: float
    """Degrees in [0, 360), counter-clockwise from +X."""
    speed: float
    timestamp: int = 0


def _iter_lines(stream: TextIO | str) -> Iterator[str]:
    if isinstance(stream, str):
        stream = io.StringIO(stream, newline="")
    for line in stream:
        yield line


def iter_samples(stream: TextIO | str) -> Iterator[tuple]:
    """Stream ``(lineno, kind, payload)`` items from a log.

    ``kind`` is ``"comment"``, ``"header"`` or ``"sample"``. Validation (field
    syntax, monotone timestamps) happens as lines arrive.
    """
    header = None
    last_ts = None
    for lineno, raw in enumerate(_iter_lines(stream), start=1):
        line = raw.rstrip("\r\n")
        if line.startswith("#"):
            yield lineno, "comment", line
            continue
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            if tuple(fields) not in (HEADER, HEADER_Z):
                raise ParseError(f"expected header {','.join(HEADER)}[,z_m], got {line!r}", lineno)
            header = tuple(fields)
            yield lineno, "header", header
            continue
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}", lineno)
        try:
            ts, mx, my = int(fields[0]), int(fields[1]), int(fields[2])
            z = float(fields[3]) if len(header) == 4 else None
        except ValueError:
            raise ParseError(f"malformed row {line!r}", lineno) from None
        if z is not None and not math.isfinite(z):
            raise ParseError("non-finite z_m", lineno)
        if last_ts is not None and ts <= last_ts:
            raise ParseError(f"timestamp {ts} does not increase (previous {last_ts})", lineno)
        last_ts = ts
        yield lineno, "sample", RawSample(ts, mx, my, z)


def parse_log(stream: TextIO | str, period_ms: int = NOMINAL_PERIOD_MS) -> SensorLog:
    """Read a whole log; gaps of one or more missing samples are reported.

    A gap is flagged when consecutive timestamps are at least two sample
    periods apart (e.g. 20 -> 60 ms at the nominal 20 ms rate).
    """
    samples, gaps, comments = [], [], []
    has_z = False
    newline = "\n"
    trailing = True
    saw_header = False
    first_raw = None
    raw_lines = []

    def tap(lines):
        nonlocal first_raw
        for ln in lines:
            if first_raw is None:
                first_raw = ln
            raw_lines.append(ln)
            yield ln

    for lineno, kind, payload in iter_samples(tap(_iter_lines(stream))):
        if kind == "comment":
            comments.append((len(samples) if saw_header else -1, payload))
        elif kind == "header":
            saw_header = True
            has_z = len(payload) == 4
        else:
            if samples and payload.timestamp - samples[-1].timestamp >= 2 * period_ms:
                gaps.append(Gap(lineno, samples[-1].timestamp, payload.timestamp))
            samples.append(payload)
    if not saw_header:
        raise EmptyInputError("log is empty (no header)")
    if first_raw is not None and first_raw.endswith("\r\n"):
        newline = "\r\n"
    if raw_lines:
        trailing = raw_lines[-1].endswith("\n")
    return SensorLog(samples, gaps, has_z, comments, newline, trailing)


def format_log(log: SensorLog) -> str:
    header = ",".join(HEADER_Z if log.has_z else HEADER)
    lines = [text for pos, text in log.comments if pos == -1]
    lines.append(header)
    by_pos = {}
    for pos, text in log.comments:
        if pos >= 0:
            by_pos.setdefault(pos, []).append(text)
    for k, s in enumerate(log.samples):
        lines.extend(by_pos.get(k, ()))
        row = f"{s.timestamp},{s.mx_counts},{s.my_counts}"
        if log.has_z:
            row += f",{s.z_m!r}"
        lines.append(row)
    lines.extend(by_pos.get(len(log.samples), ()))
    text = log.newline.join(lines)
    return text + log.newline if log.trailing_newline else text


def convert_counts(counts, spec: SensorSpec):
    """Vectorised counts -> gauss; returns ``(gauss, saturated_mask)`` with clamping."""
    g = np.asarray(counts, dtype=float) / spec.sensitivity
    saturated = np.abs(g) > spec.range_gauss
    return np.clip(g, -spec.range_gauss, spec.range_gauss), saturated


def counts_to_gauss(counts: int, spec: SensorSpec = SensorSpec()) -> float:
    """Counts divided by sensitivity, clamped to the measurement range."""
    g, _ = convert_counts(counts, spec)
    return float(g)


def is_saturated(counts: int, spec: SensorSpec = SensorSpec()) -> bool:
    return bool(convert_counts(counts, spec)[1])


def heading_from_field(mx: float, my: float) -> float:
    """Compass heading in degrees, ``atan2(my, mx)`` normalised to [0, 360)."""
    if mx == 0 and my == 0:
        raise IndeterminateHeadingError("zero field vector has no heading")
    h = math.degrees(math.atan2(my, mx)) % 360.0
    return 0.0 if h >= 360.0 else h


def normalize_heading(h: float) -> float:
    h = h % 360.0
    return 0.0 if h >= 360.0 else h


# -- speed models -------------------------------------------------------------

SpeedModel = Callable[[int], float]
"""Maps a timestamp (ms) to speed (m/s)."""


class ConstantSpeed:
    def __init__(self, speed: float):
        if not 0 <= speed:
            raise ValueError("speed must be non-negative")
        self.speed = float(speed)

    def __call__(self, timestamp_ms: int) -> float:
        return self.speed


class ProfileSpeed:
    """Piecewise-linear speed profile from ``(timestamp_ms, speed)`` pairs."""

    def __init__(self, times_ms: Sequence[float], speeds: Sequence[float]):
        t = np.asarray(times_ms, dtype=float)
        v = np.asarray(speeds, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) == 0:
            raise ValueError("profile needs matching, non-empty time and speed arrays")
        if np.any(np.diff(t) <= 0) or np.any(v < 0):
            raise ValueError("profile times must increase and speeds be non-negative")
        self.t, self.v = t, v

    def __call__(self, timestamp_ms: int) -> float:
        return float(np.interp(timestamp_ms, self.t, self.v))

    @classmethod
    def from_csv(cls, path) -> "ProfileSpeed":
        times, speeds = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("timestamp"):
                    continue
                try:
                    t, v = line.split(",")
                    times.append(float(t))
                    speeds.append(float(v))
                except ValueError:
                    raise ParseError(f"bad speed profile row {line!r}", lineno) from None
        return cls(times, speeds)


def headings_for(samples: Iterable[RawSample], spec: SensorSpec) -> np.ndarray:
    out = []
    for s in samples:
        mx, _ = convert_counts(s.mx_counts - spec.hard_iron[0], spec)
        my, _ = convert_counts(s.my_counts - spec.hard_iron[1], spec)
        try:
            out.append(heading_from_field(float(mx), float(my)))
        except IndeterminateHeadingError as exc:
            raise IndeterminateHeadingError(f"t={s.timestamp} ms: {exc}") from None
    return np.array(out)


def dead_reckon(
    samples: Sequence[RawSample],
    spec: SensorSpec = SensorSpec(),
    speed_model: SpeedModel = ConstantSpeed(MAX_SPEED_MPS / 2),
) -> list:
    """Integrate heading and speed into the 20 ms position sequence.

    ``p[k+1] = p[k] + v[k] * dt[k] * (cos h[k], sin h[k], 0)``; ``z`` comes
    from the log's ``z_m`` column when present, otherwise it stays 0.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientDataError("dead reckoning needs at least 2 samples")
    headings = headings_for(samples, spec)
    t0 = samples[0].timestamp
    period = NOMINAL_PERIOD_MS
    points = []
    pos = np.zeros(3)
    for k, s in enumerate(samples):
        if k > 0:
            prev = samples[k - 1]
            dt = (s.timestamp - prev.timestamp) / 1000.0
            h = math.radians(headings[k - 1])
            step = speed_model(prev.timestamp) * dt
            pos = pos + np.array([step * math.cos(h), step * math.sin(h), 0.0])
        p = pos.copy()
        if s.z_m is not None:
            p[2] = s.z_m
        p.setflags(write=False)
        points.append(
            PathPoint(
                tick=int(round((s.timestamp - t0) / period)),
                position=p,
                heading=float(headings[k]),
                speed=float(speed_model(s.timestamp)),
                timestamp=s.timestamp,
            )
        )
    return points


def format_path(points: Sequence[PathPoint]) -> str:
    lines = ["tick,timestamp_ms,x_m,y_m,z_m,heading_deg,speed_mps"]
    for p in points:
        x, y, z = (float(v) for v in p.position)
        lines.append(f"{p.tick},{p.timestamp},{x!r},{y!r},{z!r},{float(p.heading)!r},{float(p.speed)!r}")
    return "\n".join(lines) + "\n"


# -- maneuvers ------------------------------------------------------------------

MANEUVERS = (
    "straight",
    "left_lane_change",
    "right_lane_change",
    "left_turn",
    "right_turn",
    "accel",
    "decel",
)


def unwrap_degrees(headings) -> np.ndarray:
    """Continuous heading profile relative to the first sample (sign-symmetric)."""
    h = np.asarray(headings, dtype=float)
    d = np.diff(h)
    d = d - 360.0 * np.round(d / 360.0)
    return np.concatenate([[0.0], np.cumsum(d)])


def _smooth(x: np.ndarray, width: int) -> np.ndarray:
    width = max(1, min(width, len(x)))
    if width == 1:
        return x.copy()
    pad = width // 2
    padded = np.pad(x, (pad, width - 1 - pad), mode="edge")
    return np.convolve(padded, np.ones(width) / width, mode="valid")


def detect_maneuver(
    headings: Sequence[float],
    speeds: Sequence[float],
    dt: float = NOMINAL_PERIOD_MS / 1000.0,
    turn_deg: float = 45.0,
    lane_net_deg: float = 15.0,
    lane_min_deg: float = 4.0,
    accel_mps2: float = 0.5,
    smooth_ticks: int = 9,
    min_ticks: int = 25,
) -> str:
    """Label a window of headings (deg) and speeds (m/s).

    Positive heading change is a left turn. Precedence: turn, lane change,
    accel/decel, straight.

    - turn: smoothed net change beyond ``turn_deg`` with no sizeable swing the
      other way first;
    - lane change: heading bump away and back (net below ``lane_net_deg``,
      peak at least ``lane_min_deg``); the bump's sign gives the side;
    - accel/decel: least-squares speed slope beyond ``accel_mps2``.
    """
    if len(headings) < min_ticks or len(speeds) != len(headings):
        raise InsufficientDataError(f"maneuver window needs >= {min_ticks} matched samples")
    rel = _smooth(unwrap_degrees(headings), smooth_ticks)
    edge = max(1, min(smooth_ticks, len(rel) // 5))
    start = float(np.mean(rel[:edge]))
    rel = rel - start
    net = float(np.mean(rel[-edge:]))

    if abs(net) > turn_deg:
        sign = 1.0 if net > 0 else -1.0
        if np.min(sign * rel) > -lane_min_deg:
            return "left_turn" if net > 0 else "right_turn"

    peak_idx = int(np.argmax(np.abs(rel)))
    peak = float(rel[peak_idx])
    if abs(net) < lane_net_deg and abs(peak) >= lane_min_deg and abs(net) < abs(peak) / 2:
        return "left_lane_change" if peak > 0 else "right_lane_change"

    v = np.asarray(speeds, dtype=float)
    t = np.arange(len(v)) * dt
    slope = float(np.polyfit(t, v, 1)[0]) if np.ptp(v) > 0 else 0.0
    if slope > accel_mps2:
        return "accel"
    if slope < -accel_mps2:
        return "decel"
    return "straight"
