"""Random segmentation surfaces, their correlations and event probabilities.

Each segmentation surface is a scalar random variable observed over a sample
window (in the pipeline: the signed per-tick heading change, in degrees).
Correlations are population covariances (``n`` divisor) computed two-pass.
Sums go through ``math.fsum`` so that ``correlation(x, y)`` and
``correlation(y, x)`` are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateDistributionError,
    InsufficientDataError,
    InvalidIntervalError,
    ShapeError,
)


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


@dataclass(frozen=True)
class SegmentationSurface:
    id: int
    samples: tuple = ()
    mean: float = 0.0
    sigma: float = 0.0
    tick: Optional[int] = None
    """Tick of the isochronous surface this window ends on, if any."""

    def __post_init__(self):
        samples = tuple(float(x) for x in self.samples)
        object.__setattr__(self, "samples", samples)
        if samples:
            m = _mean(samples)
            s = math.sqrt(math.fsum((x - m) ** 2 for x in samples) / len(samples))
            object.__setattr__(self, "mean", m)
            object.__setattr__(self, "sigma", s)
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @classmethod
    def from_samples(cls, id: int, samples, tick: Optional[int] = None) -> "SegmentationSurface":
        return cls(id, tuple(samples), tick=tick)

    @classmethod
    def from_moments(cls, id: int, mean: float, sigma: float) -> "SegmentationSurface":
        return cls(id, (), float(mean), float(sigma))


def correlation(xi: SegmentationSurface, xj: SegmentationSurface) -> float:
    a, b = xi.samples, xj.samples
    if len(a) != len(b):
        raise ShapeError(f"sample counts differ ({len(a)} vs {len(b)})")
    if len(a) < 2:
        raise InsufficientDataError("correlation needs at least 2 samples")
    ma, mb = _mean(a), _mean(b)
    return math.fsum((x - ma) * (y - mb) for x, y in zip(a, b)) / len(a)


def dispersal(xi: SegmentationSurface) -> float:
    return correlation(xi, xi)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric correlation matrix stored as its packed upper triangle.

    ``upper`` lists row 0 (``K_00 .. K_0,n-1``), then row 1 from the
    diagonal, and so on: ``n (n + 1) / 2`` entries.
    """

    n: int
    upper: tuple = field(default=())

    def __post_init__(self):
        upper = tuple(float(v) for v in self.upper)
        if self.n < 0 or len(upper) != self.n * (self.n + 1) // 2:
            raise ShapeError(f"packed triangle of n={self.n} needs {self.n * (self.n + 1) // 2} entries")
        object.__setattr__(self, "upper", upper)

    def _index(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return i * self.n - i * (i - 1) // 2 + (j - i)

    def __getitem__(self, ij) -> float:
        i, j = ij
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(ij)
        return self.upper[self._index(i, j)]

    def full(self) -> np.ndarray:
        out = np.empty((self.n, self.n))
        for i in range(self.n):
            for j in range(i, self.n):
                out[i, j] = out[j, i] = self[i, j]
        return out

    def diagonal(self) -> np.ndarray:
        return np.array([self[i, i] for i in range(self.n)])

    def packed_rows(self) -> list:
        """Upper-triangle rows: row ``i`` holds ``K_ii .. K_i,n-1``."""
        rows, k = [], 0
        for i in range(self.n):
            width = self.n - i
            rows.append(self.upper[k : k + width])
            k += width
        return rows

    @classmethod
    def from_rows(cls, rows) -> "CorrelationMatrix":
        rows = [tuple(r) for r in rows]
        return cls(len(rows), tuple(v for r in rows for v in r))


def correlation_matrix(surfaces: Sequence[SegmentationSurface]) -> CorrelationMatrix:
    surfaces = list(surfaces)
    if not surfaces:
        raise InsufficientDataError("correlation matrix needs at least one surface")
    lengths = {len(s.samples) for s in surfaces}
    if len(lengths) != 1:
        raise ShapeError(f"inconsistent sample lengths {sorted(lengths)}")
    n = len(surfaces)
    upper = [correlation(surfaces[i], surfaces[j]) for i in range(n) for j in range(i, n)]
    return CorrelationMatrix(n, tuple(upper))


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def segmentation_probability(s: SegmentationSurface, x1: float, x2: float) -> float:
    """Probability that the surface's observation falls in ``(x1, x2)``.

    A zero-sigma surface is a point mass at its mean: 1 when the mean lies
    strictly inside the interval, 0 when it sits on an endpoint, and an error
    otherwise.
    """
    if x1 > x2:
        raise InvalidIntervalError(f"x1 > x2 ({x1} > {x2})")
    m, sigma = s.mean, s.sigma
    if sigma == 0:
        if x1 < m < x2:
            return 1.0
        if m == x1 or m == x2:
            return 0.0
        raise DegenerateDistributionError(
            f"surface {s.id} has zero spread and mean {m} outside ({x1}, {x2})"
        )
    p = std_normal_cdf((x2 - m) / sigma) - std_normal_cdf((x1 - m) / sigma)
    return min(1.0, max(0.0, p))


def select_segmentation_surfaces(
    candidates: Sequence[SegmentationSurface],
    threshold: float,
    intervals: Sequence[tuple],
) -> list:
    """Ids of candidates whose flag-interval probability reaches ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    if len(candidates) != len(intervals):
        raise ShapeError("one interval per candidate is required")
    selected = []
    for s, (x1, x2) in zip(candidates, intervals):
        try:
            p = segmentation_probability(s, x1, x2)
        except DegenerateDistributionError:
            p = 0.0
        if p >= threshold:
            selected.append(s.id)
    return selected


def heading_changes(headings_deg) -> np.ndarray:
    """Signed per-tick heading change in degrees, wrapped to (-180, 180]; first entry 0."""
    h = np.asarray(headings_deg, dtype=float)
    out = np.zeros_like(h)
    if len(h) > 1:
        d = np.diff(h)
        out[1:] = d - 360.0 * np.round(d / 360.0)
    return out


def window_surfaces(
    changes, tick: int, window_ticks: int, n_surfaces: int
) -> list:
    """Segmentation surfaces ending at ``tick``, ``tick - w``, ``tick - 2w``, ...

    Each gets the ``window_ticks`` observations ending on its tick; history
    before the first tick is zero-padded so every window has full length.
    """
    changes = np.asarray(changes, dtype=float)
    out = []
    for k in range(n_surfaces):
        end = tick - k * window_ticks
        lo, hi = end - window_ticks + 1, end + 1
        window = np.zeros(window_ticks)
        src_lo, src_hi = max(lo, 0), max(min(hi, len(changes)), 0)
        if src_hi > src_lo:
            window[src_lo - lo : src_hi - lo] = changes[src_lo:src_hi]
        out.append(SegmentationSurface.from_samples(k, window, tick=end))
    return out


def change_probability(s: SegmentationSurface, band: float) -> float:
    """Probability that the observation leaves ``(-band, band)``."""
    try:
        inside = segmentation_probability(s, -band, band)
    except DegenerateDistributionError:
        inside = 0.0
    return 1.0 - inside
