"""Chords across a window of isochronous surfaces and their vibration signal.

The node graph stacks the surfaces' mini-node lattices: transverse edges join
4-neighbours inside a surface, longitudinal edges join the same lattice node
on consecutive surfaces. Each edge runs along one of three lattice axes
(longitudinal, row, column). A chord is a walk whose consecutive edges lie on
different axes, so it never backtracks and never continues straight along a
lattice line; revisiting nodes (self-intersection, closure) is allowed.
Chords are listed once per node sequence up to reversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, NotFoundError, ShapeError

AXIS_LONGITUDINAL, AXIS_ROW, AXIS_COL = 0, 1, 2

# Largest value below 1.0: untraveled ticks never report certainty.
_RHO_CAP = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class ChordGraph:
    shape: tuple
    """``(surfaces, rows, cols)``."""
    ticks: tuple
    edges: tuple
    """``(node_a, node_b, axis)`` with ``node_a < node_b``; nodes are ``(s, r, c)``."""
    chords: tuple
    """Node sequences, each with at least two edges."""

    @property
    def nodes(self) -> list:
        s, r, c = self.shape
        return [(i, j, k) for i in range(s) for j in range(r) for k in range(c)]

    def chord(self, chord_id: int) -> tuple:
        if not 0 <= chord_id < len(self.chords):
            raise NotFoundError(f"no chord with id {chord_id}")
        return self.chords[chord_id]

    def chord_surfaces(self, chord_id: int) -> set:
        return {node[0] for node in self.chord(chord_id)}


def _lattice_edges(n_surfaces: int, rows: int, cols: int) -> list:
    edges = []
    for s in range(n_surfaces):
        for r in range(rows):
            for c in range(cols):
                node = (s, r, c)
                if s + 1 < n_surfaces:
                    edges.append((node, (s + 1, r, c), AXIS_LONGITUDINAL))
                if r + 1 < rows:
                    edges.append((node, (s, r + 1, c), AXIS_ROW))
                if c + 1 < cols:
                    edges.append((node, (s, r, c + 1), AXIS_COL))
    return sorted(edges)


@lru_cache(maxsize=64)
def _lattice_chords(n_surfaces: int, rows: int, cols: int, max_length: int) -> tuple:
    edges = _lattice_edges(n_surfaces, rows, cols)
    adjacency = {}
    for a, b, axis in edges:
        adjacency.setdefault(a, []).append((b, axis))
        adjacency.setdefault(b, []).append((a, axis))
    for nbrs in adjacency.values():
        nbrs.sort()

    found = set()

    def extend(path, last_axis):
        if len(path) - 1 >= 2:
            rev = tuple(reversed(path))
            found.add(min(tuple(path), rev))
        if len(path) - 1 == max_length:
            return
        for nxt, axis in adjacency.get(path[-1], ()):
            if axis != last_axis:
                path.append(nxt)
                extend(path, axis)
                path.pop()

    for start in sorted(adjacency):
        for nxt, axis in adjacency[start]:
            extend([start, nxt], axis)
    return tuple(edges), tuple(sorted(found))


def build_chord_graph(surfaces: Sequence, max_length: int = 4) -> ChordGraph:
    """Enumerate chords over consecutive surfaces (deterministic, lexicographic)."""
    surfaces = list(surfaces)
    if len(surfaces) < 2:
        raise InsufficientDataError("a chord graph needs at least two surfaces")
    grid = surfaces[0].grid
    for s in surfaces[1:]:
        if not s.grid.same_shape(grid):
            raise ShapeError("all surfaces in a chord window must share their grid")
    if max_length < 2:
        raise ValueError("max_length must allow at least two edges")
    edges, chords = _lattice_chords(len(surfaces), grid.rows, grid.cols, max_length)
    return ChordGraph(
        (len(surfaces), grid.rows, grid.cols),
        tuple(s.tick for s in surfaces),
        edges,
        chords,
    )


@dataclass(frozen=True)
class VibrationSample:
    tick: int
    delta: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.delta) or self.delta < 0:
            raise ValueError(f"delta must be finite and >= 0, got {self.delta}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")


def delta(
    tick: int,
    v_norm: float,
    a_norm: float,
    omega_score: float,
    weights=(1.0, 1.0, 1.0),
    v_ref: float = 13.9,
    a_ref: float = 3.0,
) -> float:
    """Chord vibration: weighted sum of normalised speed, acceleration and obstacle terms."""
    w_v, w_a, w_o = weights
    if min(v_norm, a_norm, omega_score) < 0 or min(w_v, w_a, w_o) < 0:
        raise ValueError(f"tick {tick}: delta inputs and weights must be non-negative")
    return w_v * (v_norm / v_ref) + w_a * (a_norm / a_ref) + w_o * omega_score


def propagate_disturbance(
    samples: Sequence[VibrationSample],
    graph: ChordGraph,
    chord_id: int,
    amount: float,
    gamma: float = 0.8,
) -> tuple:
    """Spread a disturbance on one chord over every surface of the window.

    Surface ``s`` receives ``amount * gamma ** d`` where ``d`` is its hop
    distance to the nearest surface the chord touches. Returns a new tuple;
    the input is untouched, so the update lands all at once.
    """
    if len(samples) != graph.shape[0]:
        raise ShapeError(f"{len(samples)} samples for a {graph.shape[0]}-surface graph")
    if not math.isfinite(amount):
        raise ValueError("disturbance amount must be finite")
    touched = sorted(graph.chord_surfaces(chord_id))
    out = []
    for s, sample in enumerate(samples):
        d = min(abs(s - t) for t in touched)
        new = max(0.0, sample.delta + amount * gamma**d)
        out.append(replace(sample, delta=new))
    return tuple(out)


def propagation_probability(deltas: Sequence[float], traveled: bool = False) -> float:
    """``1 - exp(-mean(delta))`` for untraveled ticks; exactly 1 on the traveled path."""
    deltas = list(deltas)
    if not deltas:
        raise InsufficientDataError("propagation probability needs a non-empty window")
    if traveled:
        return 1.0
    mean = math.fsum(deltas) / len(deltas)
    return min(-math.expm1(-mean), _RHO_CAP)


def flag_if_segmentation(rho: float, rho_min: float) -> bool:
    return rho > rho_min


def min_variation_chords(graph: ChordGraph, delta_history) -> list:
    """Per tick, the chord whose mean delta changed least since the previous tick.

    ``delta_history`` is ``(ticks, surfaces)``; a chord's delta is the mean over
    the surfaces it touches. Ties go to the lowest chord id. The first tick has
    no predecessor and is skipped.
    """
    hist = np.asarray(delta_history, dtype=float)
    if hist.ndim != 2 or hist.shape[1] != graph.shape[0]:
        raise ShapeError("delta history must be (ticks, surfaces) for this graph")
    if not graph.chords:
        return []
    members = np.zeros((len(graph.chords), graph.shape[0]))
    for cid in range(len(graph.chords)):
        idx = sorted(graph.chord_surfaces(cid))
        members[cid, idx] = 1.0 / len(idx)
    chord_delta = hist @ members.T
    variation = np.abs(np.diff(chord_delta, axis=0))
    return [int(np.argmin(row)) for row in variation]
