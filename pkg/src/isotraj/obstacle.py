"""Obstacle domains inside path sections and their volume integrals.

A path section SP is the box ``[c3, d3] x [y0, y1] x [z0, z1]``. Each
obstacle domain inside it is the closed region between two height fields,
``zeta1(y, z) <= x <= zeta2(y, z)``, over the domain's own Y-Z rectangle.
The zero-extended integrand is ``f`` inside the union of domains and 0
elsewhere in the section.

Integration runs a midpoint rule over Y-Z cells; along X the inner integral
is taken only over the (merged) ``[zeta1, zeta2]`` spans at each cell, so the
indicator discontinuity never gets sampled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import OutOfDomainError, ParseError

ScalarField = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

_BOUNDS_CHECK_RES = 17


class DegenerateRegionWarning(UserWarning):
    """A section with zero measure was integrated; the result is 0."""


def _eval_field(fn, *args) -> np.ndarray:
    shape = np.broadcast(*args).shape
    return np.broadcast_to(np.asarray(fn(*args), dtype=float), shape)


@dataclass(frozen=True)
class HeightField:
    """``x = evaluator(y, z)`` over the rectangle ``bounds = (y0, y1, z0, z1)``."""

    evaluator: Callable
    bounds: tuple

    def __post_init__(self):
        y0, y1, z0, z1 = map(float, self.bounds)
        if not (y0 <= y1 and z0 <= z1):
            raise ValueError(f"bad Y-Z bounds {self.bounds}")
        object.__setattr__(self, "bounds", (y0, y1, z0, z1))

    def __call__(self, y, z) -> np.ndarray:
        return _eval_field(self.evaluator, np.asarray(y, float), np.asarray(z, float))

    @classmethod
    def constant(cls, x: float, bounds) -> "HeightField":
        return cls(lambda y, z: x, bounds)

    @classmethod
    def from_grid(cls, samples, bounds) -> "HeightField":
        """Bilinear interpolation of ``samples[iz, iy]`` laid evenly over ``bounds``."""
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2 or min(samples.shape) < 2:
            raise ValueError("height-field grid needs at least 2x2 samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("non-finite height-field sample")
        y0, y1, z0, z1 = bounds
        nz, ny = samples.shape
        interp = RegularGridInterpolator(
            (np.linspace(z0, z1, nz), np.linspace(y0, y1, ny)),
            samples,
            method="linear",
            bounds_error=False,
            fill_value=None,
        )

        def evaluate(y, z):
            y, z = np.broadcast_arrays(y, z)
            pts = np.stack([np.clip(z, z0, z1), np.clip(y, y0, y1)], axis=-1)
            return interp(pts.reshape(-1, 2)).reshape(y.shape)

        hf = cls(evaluate, bounds)
        object.__setattr__(hf, "samples", samples)
        return hf

    def contains(self, y, z) -> np.ndarray:
        y0, y1, z0, z1 = self.bounds
        y, z = np.asarray(y), np.asarray(z)
        return (y >= y0) & (y <= y1) & (z >= z0) & (z <= z1)


@dataclass(frozen=True)
class ObstacleDomain:
    zeta1: HeightField
    zeta2: HeightField
    c3: float
    d3: float

    def __post_init__(self):
        if self.zeta1.bounds != self.zeta2.bounds:
            raise ValueError("zeta1 and zeta2 must share their Y-Z bounds")
        if not self.c3 <= self.d3:
            raise ValueError("c3 must not exceed d3")
        y0, y1, z0, z1 = self.bounds
        ys, zs = np.meshgrid(
            np.linspace(y0, y1, _BOUNDS_CHECK_RES), np.linspace(z0, z1, _BOUNDS_CHECK_RES)
        )
        lo, hi = self.zeta1(ys, zs), self.zeta2(ys, zs)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("height fields must be finite over their bounds")
        if np.any(lo < self.c3) or np.any(hi > self.d3) or np.any(lo > hi):
            raise ValueError("obstacle domain violates c3 <= zeta1 <= zeta2 <= d3")

    @property
    def bounds(self) -> tuple:
        return self.zeta1.bounds

    def contains(self, x, y, z) -> np.ndarray:
        x, y, z = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, z)))
        inside = self.zeta1.contains(y, z)
        lo, hi = self.zeta1(y, z), self.zeta2(y, z)
        return inside & (x >= lo) & (x <= hi)


@dataclass(frozen=True)
class PathSection:
    yz_region: tuple
    c3: float
    d3: float
    domains: tuple = field(default=())

    def __post_init__(self):
        y0, y1, z0, z1 = map(float, self.yz_region)
        if not (y0 <= y1 and z0 <= z1 and self.c3 <= self.d3):
            raise ValueError("bad path-section bounds")
        object.__setattr__(self, "yz_region", (y0, y1, z0, z1))
        object.__setattr__(self, "domains", tuple(self.domains))
        for dom in self.domains:
            dy0, dy1, dz0, dz1 = dom.bounds
            if dy0 < y0 or dy1 > y1 or dz0 < z0 or dz1 > z1:
                raise ValueError("obstacle domain footprint leaves the section")
            if dom.c3 < self.c3 or dom.d3 > self.d3:
                raise ValueError("obstacle domain X range leaves the section")

    @property
    def volume(self) -> float:
        y0, y1, z0, z1 = self.yz_region
        return (self.d3 - self.c3) * (y1 - y0) * (z1 - z0)

    def contains(self, x, y, z) -> np.ndarray:
        y0, y1, z0, z1 = self.yz_region
        x, y, z = (np.asarray(v, float) for v in (x, y, z))
        return (x >= self.c3) & (x <= self.d3) & (y >= y0) & (y <= y1) & (z >= z0) & (z <= z1)

    def in_obstacle(self, x, y, z) -> np.ndarray:
        x, y, z = np.broadcast_arrays(*(np.asarray(v, float) for v in (x, y, z)))
        mask = np.zeros(x.shape, dtype=bool)
        for dom in self.domains:
            mask |= dom.contains(x, y, z)
        return mask


def indicator_eval(f: ScalarField, section: PathSection, p) -> float:
    """Zero-extended field value at ``p``: ``f(p)`` inside any domain, else 0."""
    x, y, z = (float(v) for v in p)
    if not section.contains(x, y, z):
        raise OutOfDomainError(f"point {tuple(p)} lies outside the path section")
    if section.in_obstacle(x, y, z):
        return float(_eval_field(f, np.float64(x), np.float64(y), np.float64(z)))
    return 0.0


def _merged_spans(section: PathSection, y: np.ndarray, z: np.ndarray):
    """Per-cell union of the domains' X spans, as a list of ``(lo, hi)`` arrays.

    Cells not covered by a span carry ``lo == hi`` (zero length).
    """
    spans = []
    for dom in section.domains:
        covered = dom.zeta1.contains(y, z)
        lo = np.where(covered, dom.zeta1(y, z), np.nan)
        hi = np.where(covered, dom.zeta2(y, z), np.nan)
        spans.append((lo, hi))
    if not spans:
        return []
    lo = np.stack([s[0] for s in spans])
    hi = np.stack([s[1] for s in spans])
    order = np.argsort(np.where(np.isnan(lo), np.inf, lo), axis=0, kind="stable")
    lo = np.take_along_axis(lo, order, axis=0)
    hi = np.take_along_axis(hi, order, axis=0)

    merged = []
    cur_lo, cur_hi = lo[0].copy(), hi[0].copy()
    for q in range(1, lo.shape[0]):
        nxt_lo, nxt_hi = lo[q], hi[q]
        valid = ~np.isnan(nxt_lo)
        cur_valid = ~np.isnan(cur_lo)
        overlap = valid & cur_valid & (nxt_lo <= cur_hi)
        disjoint = valid & cur_valid & ~overlap
        # Close the current span where the next one starts beyond it.
        emit_lo = np.where(disjoint, cur_lo, np.nan)
        emit_hi = np.where(disjoint, cur_hi, np.nan)
        merged.append((emit_lo, emit_hi))
        cur_hi = np.where(overlap, np.maximum(cur_hi, nxt_hi), cur_hi)
        cur_lo = np.where(disjoint, nxt_lo, cur_lo)
        cur_hi = np.where(disjoint, nxt_hi, cur_hi)
    merged.append((cur_lo, cur_hi))
    out = []
    for a, b in merged:
        a = np.where(np.isnan(a), 0.0, a)
        b = np.where(np.isnan(b), a, b)
        out.append((a, b))
    return out


def integrate_section(f: ScalarField, section: PathSection, resolution: int = 32) -> float:
    """Integral of the zero-extended field over the section.

    ``resolution`` is the number of midpoint cells per axis (Y, Z, and along
    each X span).
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2 per axis")
    y0, y1, z0, z1 = section.yz_region
    if section.volume == 0.0:
        warnings.warn("path section has zero volume", DegenerateRegionWarning, stacklevel=2)
        return 0.0
    if not section.domains:
        return 0.0
    dy, dz = (y1 - y0) / resolution, (z1 - z0) / resolution
    yc = y0 + (np.arange(resolution) + 0.5) * dy
    zc = z0 + (np.arange(resolution) + 0.5) * dz
    zz, yy = np.meshgrid(zc, yc, indexing="ij")
    y, z = yy.ravel(), zz.ravel()
    k = (np.arange(resolution) + 0.5) / resolution
    total = np.zeros(y.shape)
    for lo, hi in _merged_spans(section, y, z):
        length = hi - lo
        xs = lo[:, None] + k[None, :] * length[:, None]
        vals = _eval_field(f, xs, y[:, None], z[:, None])
        total += vals.sum(axis=1) * (length / resolution)
    return float(total.sum() * dy * dz)


def integrate_multi(f: ScalarField, sections: Sequence[PathSection], resolution: int = 32) -> float:
    return math.fsum(integrate_section(f, s, resolution) for s in sections)


def obstacle_fraction(section: PathSection, resolution: int = 16) -> float:
    """Share of the section's volume taken by obstacle domains, in [0, 1]."""
    if section.volume == 0.0:
        return 0.0
    frac = integrate_section(lambda x, y, z: 1.0, section, resolution) / section.volume
    return min(1.0, max(0.0, frac))


# -- fixture files ----------------------------------------------------------
#
#   # comment lines allowed anywhere
#   yz_bounds <y0> <y1> <z0> <z1>
#   x_bounds <c3> <d3>
#   grid <ny> <nz>
#   domain                      (repeat per obstacle domain)
#   zeta1
#   <nz rows of ny values>
#   zeta2
#   <nz rows of ny values>
#
# Every domain's height fields span the full yz_bounds with the declared grid.


def load_section(path: str | Path) -> PathSection:
    lines = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        text = raw.split("#", 1)[0].strip()
        if text:
            lines.append((lineno, text.split()))
    header = {}
    it = iter(lines)
    pending = None
    for lineno, toks in it:
        if toks[0] in ("yz_bounds", "x_bounds", "grid"):
            header[toks[0]] = (lineno, toks[1:])
        else:
            pending = (lineno, toks)
            break
    for key, n in (("yz_bounds", 4), ("x_bounds", 2), ("grid", 2)):
        if key not in header:
            raise ParseError(f"obstacle fixture {path}: missing {key!r} header")
        lineno, vals = header[key]
        if len(vals) != n:
            raise ParseError(f"{key} expects {n} values", line=lineno)
    try:
        yz = tuple(float(v) for v in header["yz_bounds"][1])
        c3, d3 = (float(v) for v in header["x_bounds"][1])
        ny, nz = (int(v) for v in header["grid"][1])
    except ValueError as exc:
        raise ParseError(f"obstacle fixture {path}: {exc}") from None

    def read_block(name):
        lineno, toks = next(it, (None, None))
        if toks != [name]:
            raise ParseError(f"expected {name!r}", line=lineno)
        rows = []
        for _ in range(nz):
            lineno, toks = next(it, (None, None))
            if toks is None or len(toks) != ny:
                raise ParseError(f"{name} row needs {ny} values", line=lineno)
            try:
                rows.append([float(v) for v in toks])
            except ValueError:
                raise ParseError(f"non-numeric {name} sample", line=lineno) from None
        return np.array(rows)

    domains = []
    while pending is not None:
        lineno, toks = pending
        if toks != ["domain"]:
            raise ParseError(f"expected 'domain', got {' '.join(toks)!r}", line=lineno)
        z1 = read_block("zeta1")
        z2 = read_block("zeta2")
        try:
            domains.append(
                ObstacleDomain(HeightField.from_grid(z1, yz), HeightField.from_grid(z2, yz), c3, d3)
            )
        except ValueError as exc:
            raise ParseError(f"obstacle fixture {path}: {exc}", line=lineno) from None
        pending = next(it, None)
    try:
        return PathSection(yz, c3, d3, tuple(domains))
    except ValueError as exc:
        raise ParseError(f"obstacle fixture {path}: {exc}") from None


def write_section(path: str | Path, yz_region, c3: float, d3: float, grids) -> None:
    """Write a fixture; ``grids`` is a list of ``(zeta1_samples, zeta2_samples)``."""
    grids = [(np.asarray(a, float), np.asarray(b, float)) for a, b in grids]
    nz, ny = grids[0][0].shape if grids else (2, 2)
    out = [
        "yz_bounds " + " ".join(repr(float(v)) for v in yz_region),
        f"x_bounds {float(c3)!r} {float(d3)!r}",
        f"grid {ny} {nz}",
    ]
    for a, b in grids:
        out.append("domain")
        for name, g in (("zeta1", a), ("zeta2", b)):
            out.append(name)
            out.extend(" ".join(repr(float(v)) for v in row) for row in g)
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
