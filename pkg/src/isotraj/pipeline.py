"""Tick-by-tick replay of a sensor log through every stage.

For each 20 ms sample: dead-reckoned pose -> isochronous surface -> node
velocity blocks -> chord vibration and its propagation over the recent
surfaces -> segmentation statistics -> one ``TrajectoryState`` row. Every
``predict.interval_ticks`` the path store is asked for candidate paths,
which are scored against the log's own continuation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import chords as ch
from .config import Config
from .errors import IsoTrajError, TickError
from .frames import FramePose, rotation_from_yaw
from .ingest import (
    ConstantSpeed,
    ProfileSpeed,
    SensorLog,
    SensorSpec,
    dead_reckon,
    detect_maneuver,
)
from .obstacle import PathSection, load_section, obstacle_fraction
from .predict import (
    Constraints,
    PathStore,
    assemble_state,
    green_of,
    predict_horizon,
    rms_error,
    update_store,
)
from .segmentation import (
    change_probability,
    correlation_matrix,
    heading_changes,
    window_surfaces,
)
from .surface import GridSpec, build_surface, choose_grid, regrid, velocity_iso_matrix


def speed_model_for(cfg: Config):
    if cfg.speed.model == "profile":
        return ProfileSpeed.from_csv(cfg.speed.profile)
    return ConstantSpeed(cfg.speed.constant_mps)


def load_sections(paths: Sequence[str]) -> list:
    return [load_section(p) for p in paths if p]


class ObstacleField:
    """Look-ahead obstacle score over a fixed set of world-frame sections."""

    def __init__(self, sections: Sequence[PathSection], resolution: int = 16,
                 lookahead_m: float = 20.0, step_m: float = 1.0):
        self.sections = list(sections)
        self.fractions = [obstacle_fraction(s, resolution) for s in self.sections]
        n = max(1, int(math.floor(lookahead_m / step_m)))
        self.offsets = np.arange(1, n + 1) * step_m

    def score(self, position: np.ndarray, heading_deg: float) -> float:
        if not self.sections:
            return 0.0
        h = math.radians(heading_deg)
        xs = position[0] + self.offsets * math.cos(h)
        ys = position[1] + self.offsets * math.sin(h)
        zs = np.full_like(xs, position[2])
        best = 0.0
        for sec, frac in zip(self.sections, self.fractions):
            if frac > best and np.any(sec.contains(xs, ys, zs)):
                best = frac
        return best


@dataclass
class Prediction:
    tick: int
    candidates: list
    rms: float
    maneuver: Optional[str]


@dataclass
class DayResult:
    day: Optional[int]
    points: list
    states: list = field(default_factory=list)
    predictions: list = field(default_factory=list)

    @property
    def mean_rms(self) -> float:
        if not self.predictions:
            return float("nan")
        return math.fsum(p.rms for p in self.predictions) / len(self.predictions)

    @property
    def max_rms(self) -> float:
        return max((p.rms for p in self.predictions), default=float("nan"))


def run_log(
    log: SensorLog,
    cfg: Config,
    store: PathStore,
    obstacles: Optional[ObstacleField] = None,
    constraints: Optional[Constraints] = None,
    day: Optional[int] = None,
) -> DayResult:
    points = dead_reckon(log.samples, SensorSpec.from_config(cfg.sensor), speed_model_for(cfg))
    obstacles = obstacles or ObstacleField([])
    result = DayResult(day, points)

    period = cfg.sample_period_ms
    dt = cfg.dt
    c = cfg.chords
    weights = (c.w_v, c.w_a, c.w_o)
    base = GridSpec(cfg.surface.rows, cfg.surface.cols, cfg.surface.spacing)
    grid = base
    headings = np.array([p.heading for p in points])
    speeds = np.array([p.speed for p in points])
    changes = heading_changes(headings)
    horizon = cfg.predict.horizon_ticks

    window = deque(maxlen=c.window_surfaces)  # recent surfaces on the current grid
    vib = deque(maxlen=c.window_surfaces)
    rhos = []
    last_raw = 0.0
    green_lik = None

    for k, p in enumerate(points):
        try:
            pose = FramePose(p.position, rotation_from_yaw(math.radians(p.heading)),
                             p.tick * period, period)
            surf = build_surface(pose, grid, tick=k)
            if window and not window[-1].grid.same_shape(grid):
                regridded = [regrid(s, grid) for s in window]
                window.clear()
                window.extend(regridded)
            if window:
                before = window[-2] if len(window) > 1 else None
                vim = velocity_iso_matrix(window[-1], surf, before)
                v_norm = float(np.mean(np.linalg.norm(vim.velocities, axis=1)))
                a_norm = float(np.mean(np.linalg.norm(vim.accelerations, axis=1)))
            else:
                v_norm = a_norm = 0.0
            omega = obstacles.score(p.position, p.heading)
            raw = ch.delta(k, v_norm, a_norm, omega, weights, c.v_ref, c.a_ref)

            window.append(surf)
            vib.append(ch.VibrationSample(k, last_raw))
            disturbance = raw - last_raw
            last_raw = raw
            if len(window) >= 2:
                graph = ch.build_chord_graph(window, c.max_length)
                newest = len(window) - 1
                cid = next((i for i, chord in enumerate(graph.chords)
                            if any(node[0] == newest for node in chord)), None)
                if cid is not None:
                    vib = deque(ch.propagate_disturbance(tuple(vib), graph, cid, disturbance, c.gamma),
                                maxlen=c.window_surfaces)
                else:
                    vib[-1] = ch.VibrationSample(k, raw)
            else:
                vib[-1] = ch.VibrationSample(k, raw)
            rho = ch.propagation_probability([s.delta for s in vib])
            rhos.append(rho)

            seg = window_surfaces(changes, k, cfg.segmentation.window_ticks, cfg.segmentation.n_surfaces)
            kmat = correlation_matrix(seg)
            seg_p = change_probability(seg[0], cfg.segmentation.band_deg)

            state = assemble_state(
                tick=p.tick,
                position=p.position,
                correlation=kmat,
                obstacle_score=omega,
                seg_probability=seg_p,
                delta=vib[-1].delta,
                rho=rho,
                flagged=ch.flag_if_segmentation(rho, c.rho_min),
            )
            result.states.append(state)

            if k % cfg.predict.interval_ticks == 0 and k + horizon < len(points):
                recent = points[max(0, k - cfg.maneuver.window_ticks + 1): k + 1]
                cands = predict_horizon(
                    store, recent, horizon, dt, cfg.predict.max_candidates,
                    constraints, cfg.store.laplace_alpha, rhos[-c.window_surfaces:],
                )
                green = green_of(cands)
                green_lik = green.likelihood
                truth = np.array([q.position for q in points[k + 1: k + 1 + horizon]])
                maneuver = None
                if len(recent) >= cfg.maneuver.window_ticks:
                    m = cfg.maneuver
                    maneuver = detect_maneuver(
                        headings[k - m.window_ticks + 1: k + 1], speeds[k - m.window_ticks + 1: k + 1],
                        dt, m.turn_deg, m.lane_net_deg, m.lane_min_deg, m.accel_mps2, m.smooth_ticks,
                    )
                result.predictions.append(Prediction(p.tick, cands, rms_error(green.points, truth), maneuver))

            grid = choose_grid(base, p.speed, rho, green_lik, cfg.surface.stop_speed,
                               cfg.surface.refine_rho, cfg.surface.refine_likelihood)
        except IsoTrajError as exc:
            if isinstance(exc, TickError):
                raise
            raise TickError(p.tick, exc) from exc
    return result


def replay_days(
    logs: Sequence[SensorLog],
    days: Sequence[int],
    cfg: Config,
    store: PathStore,
    obstacles: Optional[ObstacleField] = None,
    constraints: Optional[Constraints] = None,
) -> tuple:
    """Replay one log per day in order, growing the store after each day.

    Predictions for day ``d`` only see trajectories from earlier days.
    Returns ``(results, final_store)``.
    """
    if len(logs) != len(days):
        raise ValueError("one log per day is required")
    results = []
    for log, day in zip(logs, days):
        res = run_log(log, cfg, store, obstacles, constraints, day)
        store = update_store(store, res.points, day)
        results.append(res)
    return results, store


REPORT_COLUMNS = ("day", "ticks", "predictions", "mean_rms_m", "max_rms_m",
                  "flagged_ticks", "mean_rho", "mean_green_likelihood")


def summary_rows(results: Sequence[DayResult]) -> list:
    rows = []
    for r in results:
        greens = [green_of(p.candidates).likelihood for p in r.predictions]
        rows.append((
            r.day,
            len(r.states),
            len(r.predictions),
            r.mean_rms,
            r.max_rms,
            sum(s.flagged for s in r.states),
            math.fsum(s.rho for s in r.states) / max(1, len(r.states)),
            math.fsum(greens) / len(greens) if greens else float("nan"),
        ))
    return rows


def format_report_csv(results: Sequence[DayResult]) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for row in summary_rows(results):
        lines.append(",".join(str(v) if isinstance(v, int) or v is None else repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def format_report_text(results: Sequence[DayResult]) -> str:
    lines = ["replay summary", ""]
    lines.append(f"{'day':>4} {'ticks':>7} {'preds':>6} {'mean rms [m]':>13} {'max rms [m]':>12} "
                 f"{'flagged':>8} {'mean rho':>9} {'green lik':>10}")
    for day, ticks, preds, mean, mx, flagged, rho, lik in summary_rows(results):
        lines.append(f"{str(day):>4} {ticks:>7d} {preds:>6d} {mean:>13.4f} {mx:>12.4f} "
                     f"{flagged:>8d} {rho:>9.4f} {lik:>10.4f}")
    means = [r.mean_rms for r in results]
    if len(means) > 1:
        ordered = all(b <= a for a, b in zip(means, means[1:]))
        lines.append("")
        lines.append(f"mean horizon error non-increasing across days: {'yes' if ordered else 'no'}")
    return "\n".join(lines) + "\n"
