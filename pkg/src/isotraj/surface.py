"""Isochronous surfaces and their mini-node velocity matrices.

A surface is the per-tick slice of the trajectory: a planar lattice of
mini-nodes in the vehicle's local Y-Z plane (transverse to travel), centred
on the pose origin. Nodes are kept in row-major order everywhere.

Each node's 3x3 kinematic block packs

    row 0 -- velocity (m/s)
    row 1 -- finite-difference acceleration (m/s^2)
    row 2 -- reserved, zero
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import SequencingError, ShapeError
from .frames import FramePose, transform_point

STANDARD_NODE_COUNTS = (4, 9, 16)


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    spacing: float = 0.5

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise ValueError("grid rows/cols must be integers")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must have positive rows/cols, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise ValueError(f"grid spacing must be positive, got {self.spacing}")

    @property
    def count(self) -> int:
        return self.rows * self.cols

    @property
    def is_standard(self) -> bool:
        return self.count in STANDARD_NODE_COUNTS

    def same_shape(self, other: "GridSpec") -> bool:
        return self.rows == other.rows and self.cols == other.cols

    def local_offsets(self) -> np.ndarray:
        """Row-major ``(count, 3)`` node offsets in the local frame."""
        ys = (np.arange(self.cols) - (self.cols - 1) / 2.0) * self.spacing
        zs = (np.arange(self.rows) - (self.rows - 1) / 2.0) * self.spacing
        zz, yy = np.meshgrid(zs, ys, indexing="ij")
        return np.column_stack([np.zeros(self.count), yy.ravel(), zz.ravel()])


@dataclass(frozen=True, eq=False)
class MiniNode:
    index: tuple
    position: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True, eq=False)
class IsochronousSurface:
    tick: int
    pose: FramePose
    grid: GridSpec
    positions: np.ndarray
    """``(count, 3)`` world positions, row-major."""
    velocities: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        vel = np.array(self.velocities, dtype=float)
        if pos.shape != (self.grid.count, 3) or vel.shape != pos.shape:
            raise ShapeError(
                f"surface expects {self.grid.count} nodes, got {pos.shape[0]} positions"
            )
        if not np.all(np.isfinite(pos)):
            raise ValueError("non-finite node position")
        pos.setflags(write=False)
        vel.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)

    @property
    def nodes(self) -> list:
        cols = self.grid.cols
        return [
            MiniNode((k // cols, k % cols), self.positions[k], self.velocities[k])
            for k in range(self.grid.count)
        ]

    def node_grid(self) -> np.ndarray:
        return self.positions.reshape(self.grid.rows, self.grid.cols, 3)


@dataclass(frozen=True, eq=False)
class VelocityIsoMatrix:
    blocks: np.ndarray
    """``(rows, cols, 3, 3)`` per-node kinematic blocks."""

    @property
    def velocities(self) -> np.ndarray:
        """Row-major ``(count, 3)`` node velocities."""
        return self.blocks[:, :, 0, :].reshape(-1, 3)

    @property
    def accelerations(self) -> np.ndarray:
        return self.blocks[:, :, 1, :].reshape(-1, 3)

    def as_matrix(self) -> np.ndarray:
        """Blocks tiled into one ``(3 rows, 3 cols)`` matrix, as laid out for 9 nodes."""
        r, c = self.blocks.shape[:2]
        return self.blocks.transpose(0, 2, 1, 3).reshape(3 * r, 3 * c)


def build_surface(pose: FramePose, grid: GridSpec, tick: Optional[int] = None) -> IsochronousSurface:
    if not isinstance(grid, GridSpec):
        raise ValueError("grid must be a GridSpec")
    if tick is None:
        tick = pose.timestamp // pose.period_ms
    offsets = grid.local_offsets()
    positions = np.array([transform_point(pose, o) for o in offsets])
    return IsochronousSurface(tick, pose, grid, positions, np.zeros_like(positions))


def velocity_iso_matrix(
    prev: IsochronousSurface,
    next: IsochronousSurface,
    before: Optional[IsochronousSurface] = None,
) -> VelocityIsoMatrix:
    """Per-node velocity blocks between two consecutive surfaces.

    With ``before`` (the surface one tick ahead of ``prev``) the acceleration
    row is filled by differencing the two successive velocities; otherwise it
    is zero.
    """
    _check_consecutive(prev, next)
    dt = (next.pose.timestamp - prev.pose.timestamp) / 1000.0
    if dt <= 0:
        raise SequencingError("surface timestamps do not advance")
    vel = (next.positions - prev.positions) / dt
    acc = np.zeros_like(vel)
    if before is not None:
        _check_consecutive(before, prev)
        dt0 = (prev.pose.timestamp - before.pose.timestamp) / 1000.0
        acc = (vel - (prev.positions - before.positions) / dt0) / dt
    rows, cols = prev.grid.rows, prev.grid.cols
    blocks = np.zeros((rows, cols, 3, 3))
    blocks[:, :, 0, :] = vel.reshape(rows, cols, 3)
    blocks[:, :, 1, :] = acc.reshape(rows, cols, 3)
    return VelocityIsoMatrix(blocks)


def with_velocities(s: IsochronousSurface, vim: VelocityIsoMatrix) -> IsochronousSurface:
    if vim.blocks.shape[:2] != (s.grid.rows, s.grid.cols):
        raise ShapeError("velocity matrix does not match the surface grid")
    return replace(s, velocities=vim.velocities)


def _check_consecutive(prev, next):
    if not prev.grid.same_shape(next.grid):
        raise ShapeError(
            f"grid mismatch: {prev.grid.rows}x{prev.grid.cols} vs {next.grid.rows}x{next.grid.cols}"
        )
    if next.tick != prev.tick + 1:
        raise SequencingError(f"ticks {prev.tick} -> {next.tick} are not consecutive")


def _resample_axis(values: np.ndarray, target: int, axis: int) -> np.ndarray:
    # Linear resampling at evenly spaced parametric positions; endpoints are
    # taken verbatim and integer positions reduce to plain subsampling.
    n = values.shape[axis]
    if target == n:
        return values.copy()
    if n == 1:
        raise ValueError("cannot interpolate a single-node axis onto more nodes")
    if target == 1:
        u = np.array([(n - 1) / 2.0])
    else:
        u = np.arange(target) * (n - 1) / (target - 1)
    i0 = np.minimum(np.floor(u).astype(int), n - 2)
    frac = u - i0
    a = np.take(values, i0, axis=axis)
    b = np.take(values, i0 + 1, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = target
    frac = frac.reshape(shape)
    out = np.where(frac == 0.0, a, np.where(frac == 1.0, b, (1.0 - frac) * a + frac * b))
    return out


def _regrid(s: IsochronousSurface, target: GridSpec) -> IsochronousSurface:
    rows, cols = s.grid.rows, s.grid.cols
    pos = s.positions.reshape(rows, cols, 3)
    vel = s.velocities.reshape(rows, cols, 3)
    pos = _resample_axis(_resample_axis(pos, target.rows, 0), target.cols, 1)
    vel = _resample_axis(_resample_axis(vel, target.rows, 0), target.cols, 1)
    extent_y = (cols - 1) * s.grid.spacing
    extent_z = (rows - 1) * s.grid.spacing
    if target.cols > 1 and extent_y > 0:
        spacing = extent_y / (target.cols - 1)
    elif target.rows > 1 and extent_z > 0:
        spacing = extent_z / (target.rows - 1)
    else:
        spacing = s.grid.spacing
    grid = GridSpec(target.rows, target.cols, spacing)
    return IsochronousSurface(s.tick, s.pose, grid, pos.reshape(-1, 3), vel.reshape(-1, 3))


def refine_grid(s: IsochronousSurface, target: GridSpec) -> IsochronousSurface:
    """Bilinear interpolation onto a finer lattice spanning the same extent.

    Only ``target.rows``/``target.cols`` are used; the spacing of the result
    follows from the unchanged extent.
    """
    if target.rows < s.grid.rows or target.cols < s.grid.cols:
        raise ValueError("refine_grid needs a target at least as fine; use coarsen_grid")
    return _regrid(s, target)


def coarsen_grid(s: IsochronousSurface, target: GridSpec) -> IsochronousSurface:
    """Subsample onto a coarser lattice, keeping corners (and the centre when it exists)."""
    if target.rows > s.grid.rows or target.cols > s.grid.cols:
        raise ValueError("coarsen_grid needs a target at most as fine; use refine_grid")
    return _regrid(s, target)


def regrid(s: IsochronousSurface, target: GridSpec) -> IsochronousSurface:
    if target.same_shape(s.grid):
        return s
    if target.rows >= s.grid.rows and target.cols >= s.grid.cols:
        return refine_grid(s, target)
    if target.rows <= s.grid.rows and target.cols <= s.grid.cols:
        return coarsen_grid(s, target)
    return refine_grid(coarsen_grid(s, GridSpec(min(target.rows, s.grid.rows),
                                                min(target.cols, s.grid.cols),
                                                s.grid.spacing)), target)


def choose_grid(
    base: GridSpec,
    speed: float,
    rho: float,
    green_likelihood: Optional[float],
    stop_speed: float = 0.5,
    refine_rho: float = 0.5,
    refine_likelihood: float = 0.5,
) -> GridSpec:
    """Pick the node lattice for the next surface.

    Near standstill the surface drops to 2x2; when the prediction is uncertain
    (weak green candidate or high propagation probability) it goes to 4x4.
    """
    if speed < stop_speed:
        return GridSpec(2, 2, base.spacing * 2)
    uncertain = rho > refine_rho or (
        green_likelihood is not None and green_likelihood < refine_likelihood
    )
    if uncertain:
        extent = max(base.cols - 1, 1) * base.spacing
        return GridSpec(4, 4, extent / 3)
    return base
