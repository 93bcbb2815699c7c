"""Run configuration.

Every tunable lives here as a dotted key (``section.name``) so it can be set
from a plain ``key=value`` file::

    # comment
    sample_period_ms = 20
    chords.rho_min = 0.7
    speed.constant_mps = 8.0
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class SensorConfig:
    sensitivity: float = 512.0
    """Counts per gauss (HDMM01 nominal, datasheet bounds 461..563)."""
    range_gauss: float = 5.0
    noise_rms_gauss: float = 600e-6
    accuracy_deg: float = 5.0
    hard_iron_x: float = 0.0
    """Optional hard-iron offset in counts; zero means raw counts are used as is."""
    hard_iron_y: float = 0.0


@dataclass
class SpeedConfig:
    model: str = "constant"
    """``constant`` or ``profile``."""
    constant_mps: float = 8.0
    profile: str = ""
    """CSV with ``timestamp_ms,speed_mps`` rows, linearly interpolated."""


@dataclass
class SurfaceConfig:
    rows: int = 3
    cols: int = 3
    spacing: float = 0.5
    refine_rho: float = 0.5
    refine_likelihood: float = 0.5
    stop_speed: float = 0.5


@dataclass
class SegmentationConfig:
    window_ticks: int = 25
    n_surfaces: int = 3
    band_deg: float = 0.5
    """Per-tick heading change treated as "no path change"."""


@dataclass
class ObstacleConfig:
    files: str = ""
    resolution: int = 16
    lookahead_m: float = 20.0
    lookahead_step_m: float = 1.0


@dataclass
class ChordsConfig:
    gamma: float = 0.8
    rho_min: float = 0.7
    w_v: float = 1.0
    w_a: float = 1.0
    w_o: float = 1.0
    v_ref: float = 13.9
    a_ref: float = 3.0
    max_length: int = 4
    window_surfaces: int = 3


@dataclass
class ManeuverConfig:
    window_ticks: int = 50
    turn_deg: float = 45.0
    lane_net_deg: float = 15.0
    lane_min_deg: float = 4.0
    accel_mps2: float = 0.5
    smooth_ticks: int = 9


@dataclass
class StoreConfig:
    cell_size: float = 5.0
    laplace_alpha: float = 0.0


@dataclass
class PredictConfig:
    horizon_ticks: int = 100
    interval_ticks: int = 25
    max_candidates: int = 8
    constraints: str = ""


@dataclass
class Config:
    sample_period_ms: int = 20
    sensor: SensorConfig = field(default_factory=SensorConfig)
    speed: SpeedConfig = field(default_factory=SpeedConfig)
    surface: SurfaceConfig = field(default_factory=SurfaceConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    obstacle: ObstacleConfig = field(default_factory=ObstacleConfig)
    chords: ChordsConfig = field(default_factory=ChordsConfig)
    maneuver: ManeuverConfig = field(default_factory=ManeuverConfig)
    store: StoreConfig = field(default_factory=StoreConfig)
    predict: PredictConfig = field(default_factory=PredictConfig)

    @property
    def dt(self) -> float:
        return self.sample_period_ms / 1000.0

    def set(self, key: str, raw: str) -> None:
        """Assign ``raw`` (a string) to the dotted ``key``, converting by field type."""
        parts = key.strip().split(".")
        target = self
        for part in parts[:-1]:
            sub = getattr(target, part, None)
            if not dataclasses.is_dataclass(sub):
                raise ConfigError(f"unknown config section {part!r} in {key!r}")
            target = sub
        name = parts[-1]
        names = {f.name for f in dataclasses.fields(target)}
        if name not in names or dataclasses.is_dataclass(getattr(target, name)):
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(target, name)
        raw = raw.strip()
        try:
            if isinstance(current, bool):
                value = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int):
                value = int(raw)
            elif isinstance(current, float):
                value = float(raw)
            else:
                value = raw
        except ValueError:
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from None
        setattr(target, name, value)

    def items(self):
        """Yield ``(dotted_key, value)`` for every setting, in declaration order."""
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value):
                for g in dataclasses.fields(value):
                    yield f"{f.name}.{g.name}", getattr(value, g.name)
            else:
                yield f.name, value

    def validate(self) -> "Config":
        if self.sample_period_ms <= 0:
            raise ConfigError("sample_period_ms must be positive")
        if not 461 <= self.sensor.sensitivity <= 563:
            raise ConfigError("sensor.sensitivity outside datasheet bounds 461..563")
        if self.sensor.range_gauss <= 0:
            raise ConfigError("sensor.range_gauss must be positive")
        if self.speed.model not in ("constant", "profile"):
            raise ConfigError(f"unknown speed.model {self.speed.model!r}")
        if self.speed.model == "profile" and not self.speed.profile:
            raise ConfigError("speed.model=profile needs speed.profile")
        if not 0.0 <= self.chords.rho_min <= 1.0:
            raise ConfigError("chords.rho_min must lie in [0, 1]")
        if not 0.0 <= self.chords.gamma <= 1.0:
            raise ConfigError("chords.gamma must lie in [0, 1]")
        if min(self.chords.w_v, self.chords.w_a, self.chords.w_o) < 0:
            raise ConfigError("chords weights must be non-negative")
        if self.chords.v_ref <= 0 or self.chords.a_ref <= 0:
            raise ConfigError("chords.v_ref and chords.a_ref must be positive")
        if self.segmentation.window_ticks < 2 or self.segmentation.n_surfaces < 1:
            raise ConfigError("segmentation window needs >= 2 ticks and >= 1 surface")
        if self.store.cell_size <= 0:
            raise ConfigError("store.cell_size must be positive")
        if self.predict.horizon_ticks < 1 or self.predict.interval_ticks < 1:
            raise ConfigError("predict horizon/interval must be >= 1")
        if self.obstacle.resolution < 2:
            raise ConfigError("obstacle.resolution must be >= 2")
        if self.surface.rows < 1 or self.surface.cols < 1 or self.surface.spacing <= 0:
            raise ConfigError("surface grid must be positive")
        if self.maneuver.window_ticks < 25:
            raise ConfigError("maneuver.window_ticks must be >= 25")
        return self


def parse_config(text: str) -> Config:
    cfg = Config()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        cfg.set(key, value)
    return cfg.validate()


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
