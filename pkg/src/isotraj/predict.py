"""Trajectory state records, the multi-day path store and horizon prediction.

The path store is a spatial hash over the X-Y plane. For each cell it keeps a
histogram of *exit directions* (8 bins of 45 deg, bin 0 = +X, counter-
clockwise), one count per cell crossing, plus the summed unit heading vectors
of the samples spent in the cell before each exit. A rollout from the current
position forks at every newly entered cell with more than one exit direction;
each fork carries the mean heading recorded for that exit and a weight equal
to the exit's share of the histogram.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DuplicateIngestionError, IncompleteStateError, ParseError
from .segmentation import CorrelationMatrix

N_DIRECTIONS = 8
GREEN, YELLOW, RED = "green", "yellow", "red"
CLASSES = (GREEN, YELLOW, RED)


# -- state record ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrajectoryState:
    tick: int
    position: np.ndarray
    correlation: CorrelationMatrix
    obstacle_score: float
    seg_probability: float
    delta: float
    rho: float
    traveled: bool = False
    flagged: bool = False

    def __post_init__(self):
        for name in ("obstacle_score", "seg_probability", "rho"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.traveled and self.rho != 1.0:
            raise ValueError("traveled ticks carry rho = 1")

    def __eq__(self, other):
        if not isinstance(other, TrajectoryState):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f.name), getattr(other, f.name))
            if f.name == "position"
            else getattr(self, f.name) == getattr(other, f.name)
            for f in fields(self)
        )


STATE_FIELDS = ("tick", "position", "correlation", "obstacle_score", "seg_probability", "delta", "rho")

STATE_COLUMNS = (
    "tick", "x_m", "y_m", "z_m", "obstacle_score", "seg_probability",
    "delta", "rho", "traveled", "flagged", "k_upper",
)


def assemble_state(
    tick=None,
    position=None,
    correlation=None,
    obstacle_score=None,
    seg_probability=None,
    delta=None,
    rho=None,
    traveled: bool = False,
    flagged: bool = False,
) -> TrajectoryState:
    """Bundle one tick's constituents; nothing is recomputed.

    On a traveled tick ``rho`` may be omitted (it is 1 by definition).
    """
    if traveled and rho is None:
        rho = 1.0
    values = dict(tick=tick, position=position, correlation=correlation,
                  obstacle_score=obstacle_score, seg_probability=seg_probability,
                  delta=delta, rho=rho)
    for name in STATE_FIELDS:
        if values[name] is None:
            raise IncompleteStateError(name)
    pos = np.array(values["position"], dtype=float)
    pos.setflags(write=False)
    return TrajectoryState(
        int(tick), pos, correlation, float(obstacle_score), float(seg_probability),
        float(delta), float(rho), bool(traveled), bool(flagged),
    )


def _pack_k(k: CorrelationMatrix) -> str:
    return ";".join(" ".join(repr(v) for v in row) for row in k.packed_rows())


def _unpack_k(text: str) -> CorrelationMatrix:
    if not text:
        return CorrelationMatrix(0, ())
    return CorrelationMatrix.from_rows([float(v) for v in row.split()] for row in text.split(";"))


def state_to_row(s: TrajectoryState) -> str:
    x, y, z = s.position
    return ",".join([
        str(s.tick), repr(float(x)), repr(float(y)), repr(float(z)),
        repr(s.obstacle_score), repr(s.seg_probability), repr(s.delta), repr(s.rho),
        str(int(s.traveled)), str(int(s.flagged)), _pack_k(s.correlation),
    ])


def state_from_row(row: str) -> TrajectoryState:
    parts = row.rstrip("\r\n").split(",")
    if len(parts) != len(STATE_COLUMNS):
        raise ParseError(f"state row needs {len(STATE_COLUMNS)} columns, got {len(parts)}")
    try:
        return assemble_state(
            tick=int(parts[0]),
            position=[float(v) for v in parts[1:4]],
            obstacle_score=float(parts[4]),
            seg_probability=float(parts[5]),
            delta=float(parts[6]),
            rho=float(parts[7]),
            traveled=parts[8] == "1",
            flagged=parts[9] == "1",
            correlation=_unpack_k(parts[10]),
        )
    except ValueError as exc:
        raise ParseError(f"bad state row: {exc}") from None


def format_states(states: Iterable[TrajectoryState]) -> str:
    return "\n".join([",".join(STATE_COLUMNS), *(state_to_row(s) for s in states)]) + "\n"


# -- path store -------------------------------------------------------------------

@dataclass
class CellStats:
    exits: list = field(default_factory=lambda: [0] * N_DIRECTIONS)
    vectors: list = field(default_factory=lambda: [[0.0, 0.0] for _ in range(N_DIRECTIONS)])
    days: dict = field(default_factory=dict)

    @property
    def visits(self) -> int:
        return sum(self.exits)

    def mode(self) -> int:
        return int(np.argmax(self.exits))

    def mean_heading(self, b: int) -> float:
        cx, cy = self.vectors[b]
        if cx == 0.0 and cy == 0.0:
            return b * 360.0 / N_DIRECTIONS
        return math.degrees(math.atan2(cy, cx)) % 360.0


@dataclass
class PathStore:
    cell_size: float = 5.0
    cells: dict = field(default_factory=dict)
    ingested: set = field(default_factory=set)

    def cell_of(self, x: float, y: float) -> tuple:
        return (math.floor(x / self.cell_size), math.floor(y / self.cell_size))

    @property
    def empty(self) -> bool:
        return not any(c.visits for c in self.cells.values())

    @property
    def days(self) -> list:
        return sorted({d for _, d in self.ingested})

    def to_json(self) -> str:
        cells = [
            {
                "cell": list(key),
                "exits": stats.exits,
                "vectors": stats.vectors,
                "days": {str(d): n for d, n in sorted(stats.days.items())},
            }
            for key, stats in sorted(self.cells.items())
        ]
        doc = {
            "cell_size": self.cell_size,
            "cells": cells,
            "ingested": sorted([h, d] for h, d in self.ingested),
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PathStore":
        try:
            doc = json.loads(text)
            store = cls(float(doc["cell_size"]))
            for item in doc["cells"]:
                store.cells[tuple(item["cell"])] = CellStats(
                    [int(v) for v in item["exits"]],
                    [[float(a), float(b)] for a, b in item["vectors"]],
                    {int(d): int(n) for d, n in item["days"].items()},
                )
            store.ingested = {(h, int(d)) for h, d in doc["ingested"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"corrupt path store: {exc}") from None
        return store

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "store.json"
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, directory: str | Path, cell_size: float = 5.0) -> "PathStore":
        path = Path(directory) / "store.json"
        if not path.exists():
            return cls(cell_size)
        return cls.from_json(path.read_text(encoding="utf-8"))


def trajectory_hash(points: Sequence) -> str:
    h = hashlib.sha256()
    for p in points:
        x, y, z = p.position
        h.update(f"{p.tick},{x!r},{y!r},{z!r},{p.heading!r};".encode())
    return h.hexdigest()


def _exit_bin(dx: int, dy: int) -> int:
    angle = math.degrees(math.atan2(np.sign(dy), np.sign(dx)))
    return int(round(angle / (360.0 / N_DIRECTIONS))) % N_DIRECTIONS


def update_store(store: PathStore, trajectory: Sequence, day: int) -> PathStore:
    """Return a new store with the trajectory's cell crossings added.

    ``trajectory`` is a sequence of path points (``position``, ``heading``).
    Re-ingesting the same trajectory for the same day is refused.
    """
    if int(day) != day or day < 1:
        raise ValueError(f"day must be an integer >= 1, got {day}")
    key = (trajectory_hash(trajectory), int(day))
    if key in store.ingested:
        raise DuplicateIngestionError(f"trajectory {key[0][:12]} already ingested for day {day}")
    new = copy.deepcopy(store)
    new.ingested.add(key)
    if not trajectory:
        return new
    cur = new.cell_of(*trajectory[0].position[:2])
    acc = [0.0, 0.0]
    for p in trajectory:
        cell = new.cell_of(*p.position[:2])
        if cell != cur:
            stats = new.cells.setdefault(cur, CellStats())
            b = _exit_bin(cell[0] - cur[0], cell[1] - cur[1])
            stats.exits[b] += 1
            stats.vectors[b][0] += acc[0]
            stats.vectors[b][1] += acc[1]
            stats.days[int(day)] = stats.days.get(int(day), 0) + 1
            cur, acc = cell, [0.0, 0.0]
        h = math.radians(p.heading)
        acc[0] += math.cos(h)
        acc[1] += math.sin(h)
    return new


# -- candidates ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CandidatePath:
    id: int
    points: np.ndarray
    """``(horizon, 3)`` predicted positions for ticks ``t+1 .. t+horizon``."""
    likelihood: float
    path_class: Optional[str] = None
    cells: tuple = ()
    start: Optional[np.ndarray] = None
    rho: Optional[float] = None


@dataclass(frozen=True)
class Constraints:
    forbidden_cells: frozenset = frozenset()

    @classmethod
    def load(cls, path: str | Path) -> "Constraints":
        """Lines of ``ix iy`` naming forbidden store cells; ``#`` comments allowed."""
        cells = set()
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                ix, iy = (int(v) for v in text.split())
            except ValueError:
                raise ParseError(f"constraint needs 'ix iy', got {text!r}", lineno) from None
            cells.add((ix, iy))
        return cls(frozenset(cells))


def classify(
    candidates: Sequence[CandidatePath],
    rho_series: Optional[Sequence[float]] = None,
    constraints: Optional[Constraints] = None,
) -> list:
    """Colour candidates: entering a forbidden cell -> red (likelihood 0); best permitted -> green;
    other permitted -> yellow. Permitted likelihoods are renormalised to sum to 1.
    Ties go to the lowest id. The latest ``rho`` is attached for reference only.
    """
    if not candidates:
        raise ValueError("classify needs at least one candidate")
    forbidden = constraints.forbidden_cells if constraints else frozenset()
    rho = float(rho_series[-1]) if rho_series is not None and len(rho_series) else None
    permitted = [c for c in candidates if not forbidden.intersection(c.cells)]
    total = math.fsum(c.likelihood for c in permitted)
    green_id = None
    if permitted:
        green_id = min(permitted, key=lambda c: (-c.likelihood, c.id)).id
    out = []
    for c in sorted(candidates, key=lambda c: c.id):
        if forbidden.intersection(c.cells):
            out.append(replace(c, likelihood=0.0, path_class=RED, rho=rho))
            continue
        lik = c.likelihood / total if total > 0 else 1.0 / len(permitted)
        out.append(replace(c, likelihood=lik, path_class=GREEN if c.id == green_id else YELLOW, rho=rho))
    return out


@dataclass
class _Branch:
    pos: np.ndarray
    heading: float
    weight: float
    cell: Optional[tuple]
    lineage: tuple
    points: list
    cells: list


def _cells_of(points: np.ndarray, cell_size: float) -> tuple:
    seen = []
    for x, y in points[:, :2]:
        c = (math.floor(x / cell_size), math.floor(y / cell_size))
        if not seen or seen[-1] != c:
            seen.append(c)
    return tuple(seen)


def predict_horizon(
    store: PathStore,
    window: Sequence,
    horizon_ticks: int,
    dt: float = 0.02,
    max_candidates: int = 8,
    constraints: Optional[Constraints] = None,
    laplace_alpha: float = 0.0,
    rho_series: Optional[Sequence[float]] = None,
) -> list:
    """Candidate continuations of the current path over ``horizon_ticks``.

    ``window`` is the recent path (path points); its last entry is the
    current state. With an empty store the only candidate is the dead-
    reckoned extrapolation at the current heading and speed.
    """
    if horizon_ticks < 1:
        raise ValueError("horizon_ticks must be >= 1")
    if not window:
        raise ValueError("prediction needs a non-empty state window")
    cur = window[-1]
    start = np.array(cur.position, dtype=float)
    step = cur.speed * dt
    z = start[2]

    frontier = [_Branch(start[:2].copy(), float(cur.heading), 1.0, None, (), [], [])]
    use_store = not store.empty
    for _ in range(horizon_ticks):
        nxt = []
        for b in frontier:
            cell = store.cell_of(*b.pos)
            stats = store.cells.get(cell) if use_store and cell != b.cell else None
            if stats is not None and stats.visits:
                options = [k for k in range(N_DIRECTIONS) if stats.exits[k] > 0]
                total = stats.visits + laplace_alpha * len(options)
                for k in options:
                    w = (stats.exits[k] + laplace_alpha) / total
                    nxt.append(_Branch(b.pos.copy(), stats.mean_heading(k), b.weight * w,
                                       cell, b.lineage + (k,), list(b.points), list(b.cells)))
            else:
                nxt.append(replace(b, cell=cell) if cell != b.cell else b)
        for b in nxt:
            h = math.radians(b.heading)
            b.pos = b.pos + step * np.array([math.cos(h), math.sin(h)])
            b.points.append((b.pos[0], b.pos[1], z))
        nxt.sort(key=lambda b: (-b.weight, b.lineage))
        frontier = nxt[:max_candidates]

    frontier.sort(key=lambda b: b.lineage)
    candidates = []
    for cid, b in enumerate(frontier):
        pts = np.array(b.points)
        # Only cells entered after the start count; the current cell is already occupied.
        entered = _cells_of(np.vstack([start, pts]), store.cell_size)[1:]
        candidates.append(CandidatePath(cid, pts, b.weight, None, entered, start))
    forbidden = constraints.forbidden_cells if constraints else frozenset()
    if all(forbidden.intersection(c.cells) for c in candidates):
        # Every continuation is forbidden: holding position is the only permitted plan.
        hold = np.tile(start, (horizon_ticks, 1))
        candidates.append(CandidatePath(len(candidates), hold, 1.0, None, (), start))
    return classify(candidates, rho_series, constraints)


def green_of(candidates: Sequence[CandidatePath]) -> CandidatePath:
    greens = [c for c in candidates if c.path_class == GREEN]
    if len(greens) != 1:
        raise ValueError(f"expected exactly one green candidate, found {len(greens)}")
    return greens[0]


def rms_error(predicted: np.ndarray, truth: np.ndarray) -> float:
    predicted, truth = np.asarray(predicted, float), np.asarray(truth, float)
    if predicted.shape != truth.shape:
        raise ValueError("prediction and truth must have the same shape")
    return float(np.sqrt(np.mean(np.sum((predicted - truth) ** 2, axis=1))))


def candidates_geojson(predictions: Iterable[tuple]) -> dict:
    """FeatureCollection of LineStrings from ``(tick, day, candidates)`` triples.

    Coordinates are local metric ``[x, y, z]`` in the dead-reckoning frame,
    starting at the position the prediction was made from.
    """
    features = []
    for tick, day, cands in predictions:
        for c in cands:
            coords = [[float(v) for v in c.start]] + [[float(v) for v in p] for p in c.points]
            props = {"tick": int(tick), "id": c.id, "class": c.path_class,
                     "likelihood": float(c.likelihood)}
            if day is not None:
                props["day"] = int(day)
            features.append({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": props,
            })
    return {"type": "FeatureCollection", "features": features}


def dump_geojson(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
