"""Pipeline configuration: dataclass blocks loaded from TOML or JSON.

Every section maps onto one frozen dataclass. Unknown sections or keys raise
``ConfigError`` so typos never silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .filtering import WorkspaceModel
from .grasp import GripperParams, PlannerParams
from .noise import NoiseParams
from .segmentation import SegmentationParams

METHODS = ("real-view", "top-only", "all-views")


@dataclass(frozen=True)
class CompletionConfig:
    completer: str = "baseline"
    resolution: int = 40
    n_samples: int = 10
    iso: float = 0.5
    min_points: int = 4


@dataclass(frozen=True)
class ViewpointConfig:
    sampler: str = "dodecahedron"
    radius: float = 0.7
    render_plane: bool = True


@dataclass(frozen=True)
class NoiseConfig:
    enabled: bool = True
    k: float = 5000.0
    s: float = 0.0002
    sigma: float = 0.001
    l: int = 6
    per_pixel_alpha: bool = False

    def __post_init__(self):
        self.params(0)  # validates the noise parameters

    def params(self, seed: int) -> NoiseParams:
        return NoiseParams(self.k, self.s, self.sigma, self.l, int(seed), self.per_pixel_alpha)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "single"                      # single | clutter | both
    methods: tuple = METHODS
    elevations: tuple = (30.0, 45.0, 90.0)
    objects: tuple = ("cube", "long_box", "cylinder_upright", "cylinder_lying", "sphere")
    yaws: tuple = (0.0, 72.0, 144.0, 216.0, 288.0)
    max_trials: int = 0                       # 0 = all combinations
    camera_distance: float = 0.6
    real_noise: bool = False
    friction_mu: float = 0.5
    clutter_scenes: int = 5
    clutter_objects: int = 6
    clutter_elevation: float = 45.0
    budget: int = 12
    failure_radius: float = 0.01


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    method: str = "all-views"
    input: str = ""
    output_dir: str = "runs"
    jobs: int = 1
    workspace: WorkspaceModel = field(default_factory=WorkspaceModel)
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    completion: CompletionConfig = field(default_factory=CompletionConfig)
    viewpoints: ViewpointConfig = field(default_factory=ViewpointConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    gripper: GripperParams = field(default_factory=GripperParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        for m in self.experiment.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown experiment method {m!r}")
        if self.experiment.mode not in ("single", "clutter", "both"):
            raise ConfigError(f"unknown experiment mode {self.experiment.mode!r}")

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:12]

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)


SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(PipelineConfig)
            if f.default_factory is not dataclasses.MISSING}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, values: dict, where: str):
    if not isinstance(values, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kwargs = {}
    for k, v in values.items():
        default = getattr(cls(), k) if k in known else None
        if isinstance(default, tuple) and isinstance(v, list):
            v = tuple(v)
        elif isinstance(default, bool) and not isinstance(v, bool):
            raise ConfigError(f"[{where}] {k} must be a boolean")
        elif isinstance(default, (int, float)) and not isinstance(default, bool):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"[{where}] {k} must be a number")
            if isinstance(default, int) and not isinstance(v, int):
                raise ConfigError(f"[{where}] {k} must be an integer")
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def config_from_dict(data: dict) -> PipelineConfig:
    top = {}
    sections = {}
    for k, v in data.items():
        if k in SECTIONS:
            sections[k] = _build(type(SECTIONS[k]()), v, k)
        else:
            top[k] = v
    base = _build(PipelineConfig, top, "top level")
    try:
        return dataclasses.replace(base, **sections)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(data)


__all__ = ["CompletionConfig", "ExperimentConfig", "METHODS", "NoiseConfig", "PipelineConfig",
           "ViewpointConfig", "config_from_dict", "load_config"]
