"""Synthetic heading profiles and sensor logs.

No recorded drives ship with the package, so every fixture is built here:
a heading profile (degrees per tick) is turned into integer HDMM01 counts.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .ingest import RawSample, SensorLog, normalize_heading

DEFAULT_AMPLITUDE = 512  # counts, i.e. 1 gauss at nominal sensitivity


def counts_for_heading(heading_deg: float, amplitude: float = DEFAULT_AMPLITUDE) -> tuple:
    h = math.radians(heading_deg)
    return int(round(amplitude * math.cos(h))), int(round(amplitude * math.sin(h)))


def synth_log(
    headings_deg: Sequence[float],
    period_ms: int = 20,
    amplitude: float = DEFAULT_AMPLITUDE,
    z: Optional[Sequence[float]] = None,
    t0: int = 0,
) -> SensorLog:
    samples = []
    for k, h in enumerate(headings_deg):
        mx, my = counts_for_heading(h, amplitude)
        samples.append(RawSample(t0 + k * period_ms, mx, my, None if z is None else float(z[k])))
    return SensorLog(samples, has_z=z is not None)


def straight(n: int, heading: float = 0.0) -> np.ndarray:
    return np.full(n, float(heading))


def constant_turn(n: int, rate_deg: float, start: float = 0.0) -> np.ndarray:
    return np.array([normalize_heading(start + k * rate_deg) for k in range(n)])


def turn(n: int, total_deg: float, start: float = 0.0, lead: int = 5) -> np.ndarray:
    """Straight lead-in, then a linear heading ramp of ``total_deg``, then hold."""
    ramp_n = max(1, n - 2 * lead)
    rel = np.concatenate([
        np.zeros(lead),
        np.linspace(0.0, total_deg, ramp_n),
        np.full(n - lead - ramp_n, total_deg),
    ])
    return np.array([normalize_heading(start + r) for r in rel])


def lane_change(n: int, peak_deg: float = 8.0, start: float = 0.0, lead: int = 10) -> np.ndarray:
    """Heading rises to ``peak_deg`` and comes back (a smooth raised-cosine bump).

    Positive ``peak_deg`` moves the vehicle to the left.
    """
    body = n - 2 * lead
    u = np.linspace(0.0, 2 * math.pi, body)
    bump = peak_deg * 0.5 * (1 - np.cos(u))
    rel = np.concatenate([np.zeros(lead), bump, np.zeros(n - lead - body)])
    return np.array([normalize_heading(start + r) for r in rel])


def add_noise(headings_deg, amplitude_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform heading noise in ``[-amplitude_deg, amplitude_deg]``."""
    h = np.asarray(headings_deg, dtype=float)
    return np.array([normalize_heading(v) for v in h + rng.uniform(-amplitude_deg, amplitude_deg, h.shape)])


def loop_route(
    speed: float = 8.0,
    legs=(80.0, 40.0, 80.0, 40.0),
    radius: float = 10.0,
    dt: float = 0.02,
    start: float = 0.0,
) -> np.ndarray:
    """Closed rectangular route with rounded left-hand corners.

    Straight legs of the given lengths alternate with 90 deg arcs of
    ``radius``; returns the per-tick heading profile.
    """
    step = speed * dt
    arc_ticks = max(1, int(round((math.pi / 2) * radius / step)))
    rate = 90.0 / arc_ticks
    out = []
    h = start
    for leg in legs:
        out.extend([h] * int(round(leg / step)))
        for _ in range(arc_ticks):
            out.append(h)
            h += rate
        h = start + round((h - start) / 90.0) * 90.0
    return np.array([normalize_heading(v) for v in out])
