"""End-to-end planning from one posed depth view.

filter -> segment -> complete -> render viewpoints -> noise -> plan -> lift -> select
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import completion as comp
from .config import PipelineConfig
from .errors import DegenerateRegionError, EmptyInputError, EmptySurfaceError, InvalidArgumentError, NoGraspError
from .filtering import filter_cloud
from .geometry import CameraModel, DepthImage, PointCloud, depth_to_cloud
from .grasp import AntipodalPlanner, GraspCandidate, GraspPlanner, lift_grasp, reachable, select_best
from .mesh import TriangleMesh
from .noise import corrupt, viewpoint_seed
from .renderer import SceneEstimate, SupportPlane, build_bvh, render_depth
from .segmentation import Segmentation, segment
from .viewpoints import SAMPLERS, ViewpointSet

COMPLETERS = {"baseline": comp.BaselineCompleter}


@dataclass(frozen=True)
class Seeds:
    """Independent integer seeds for the random stages, all derived from one master seed."""

    completion: int
    noise: int

    @classmethod
    def from_master(cls, seed: int) -> Seeds:
        a, b = np.random.SeedSequence(int(seed)).generate_state(2)
        return cls(int(a), int(b))

    def region_rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng([self.completion, int(index)])


@dataclass
class PipelineResult:
    method: str
    cloud: PointCloud | None = None
    filtered: PointCloud | None = None
    segmentation: Segmentation | None = None
    regions: list[PointCloud] = field(default_factory=list)
    meshes: list[TriangleMesh] = field(default_factory=list)
    grids: list[comp.VoxelGrid] = field(default_factory=list)  # mean occupancy per completed region
    scene: SceneEstimate | None = None
    viewpoints: ViewpointSet | None = None
    clean: list[DepthImage] = field(default_factory=list)
    noisy: list[DepthImage] = field(default_factory=list)
    candidates: list[list[GraspCandidate]] = field(default_factory=list)
    best: GraspCandidate | None = None
    timings: dict = field(default_factory=dict)

    def all_candidates(self) -> list[GraspCandidate]:
        return [c for s in self.candidates for c in s]


class _Timer:
    def __init__(self, timings: dict, key: str):
        self.timings, self.key = timings, key

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.timings[self.key] = self.timings.get(self.key, 0.0) + time.perf_counter() - self.t0


def support_plane(cfg: PipelineConfig) -> SupportPlane:
    return SupportPlane(tuple(cfg.workspace.plane_normal), float(cfg.workspace.plane_offset))


def complete_region(region: PointCloud, index: int, cfg: PipelineConfig, seeds: Seeds) -> tuple[TriangleMesh, comp.VoxelGrid]:
    """Voxelize one region, draw completions, average, merge observed points and mesh."""
    cc = cfg.completion
    if cc.completer not in COMPLETERS:
        raise InvalidArgumentError(f"unknown completer {cc.completer!r}")
    ws = cfg.workspace
    plane = (ws.normal, ws.plane_offset)
    grid = comp.voxelize(region, cc.resolution, cc.min_points, floor_plane=plane)
    view = region.points.mean(axis=0) - region.origin
    view = view / np.linalg.norm(view)
    samples = COMPLETERS[cc.completer]().complete(grid, cc.n_samples, view_dir=view, support_plane=plane,
                                                  rng=seeds.region_rng(index))
    comp.check_superset(grid, samples)
    mean = comp.mean_shape(samples)
    return comp.mesh_from_grid(mean, region, cc.iso), mean


def estimate_scene(filtered: PointCloud, cfg: PipelineConfig, seeds: Seeds, result: PipelineResult | None = None):
    """Segment and complete; returns (segmentation, regions, meshes).

    Regions that cannot be completed are skipped, so ``meshes`` may be shorter.
    """
    timings = result.timings if result is not None else {}
    with _Timer(timings, "segment"):
        seg = segment(filtered, cfg.segmentation)
    regions, meshes = [], []
    with _Timer(timings, "completion"):
        for i, idx in enumerate(seg.regions):
            region = filtered.subset(idx)
            regions.append(region)
            try:
                mesh, grid = complete_region(region, i, cfg, seeds)
            except (DegenerateRegionError, EmptySurfaceError):
                continue
            meshes.append(mesh)
            if result is not None:
                result.grids.append(grid)
    return seg, regions, meshes


def make_viewpoints(scene: SceneEstimate, cam: CameraModel, cfg: PipelineConfig, method: str) -> ViewpointSet:
    sampler = "top-only" if method == "top-only" else cfg.viewpoints.sampler
    if sampler not in SAMPLERS:
        raise InvalidArgumentError(f"unknown viewpoint sampler {sampler!r}")
    return SAMPLERS[sampler](scene.centroid(), cfg.viewpoints.radius, up=tuple(cfg.workspace.plane_normal),
                             intr=cam)


def plan_views(images: list[DepthImage], cams, planner: GraspPlanner, cfg: PipelineConfig,
               scene: SceneEstimate | None, exclude=()) -> list[list[GraspCandidate]]:
    """Plan on each image, lift to world, and tag reachability."""
    ex = np.asarray(exclude, dtype=np.float64).reshape(-1, 3)
    out = []
    for i, (img, cam) in enumerate(zip(images, cams)):
        lifted = []
        for c in planner.plan(img, cam, viewpoint_index=i):
            c = lift_grasp(c, cam)
            ok = reachable(c, cfg.workspace, scene, cfg.gripper)
            if ok and len(ex) and np.min(np.linalg.norm(ex - c.position, axis=1)) < cfg.experiment.failure_radius:
                ok = False
            lifted.append(replace(c, reachable=bool(ok)))
        out.append(lifted)
    return out


def _select(result: PipelineResult) -> None:
    with _Timer(result.timings, "select"):
        try:
            result.best = select_best(result.candidates)
        except NoGraspError:
            result.best = None


def run_real_view(img: DepthImage, cam: CameraModel, cfg: PipelineConfig, planner: GraspPlanner | None = None,
                  exclude=()) -> PipelineResult:
    """Plan directly on the input view (no completion, no simulated viewpoints)."""
    planner = planner or AntipodalPlanner(cfg.planner, cfg.gripper)
    result = PipelineResult("real-view")
    with _Timer(result.timings, "plan"):
        scene = SceneEstimate((), support_plane(cfg))
        result.candidates = plan_views([img], [cam], planner, cfg, scene, exclude)
    result.clean = [img]
    _select(result)
    return result


def run_from_cloud(cloud: PointCloud, cam: CameraModel, cfg: PipelineConfig, method: str | None = None,
                   planner: GraspPlanner | None = None, exclude=()) -> PipelineResult:
    """Full scene-completion pipeline on a world-frame cloud.

    ``cam`` supplies the intrinsics reused by the simulated viewpoints.
    """
    method = method or cfg.method
    if method == "real-view":
        raise InvalidArgumentError("real-view planning needs a depth image, not a cloud")
    planner = planner or AntipodalPlanner(cfg.planner, cfg.gripper)
    seeds = Seeds.from_master(cfg.seed)
    result = PipelineResult(method, cloud=cloud)
    with _Timer(result.timings, "filter"):
        result.filtered = filter_cloud(cloud, cfg.workspace)
    if len(result.filtered) == 0:
        raise EmptyInputError("no object points left after filtering")
    result.segmentation, result.regions, result.meshes = estimate_scene(result.filtered, cfg, seeds, result)
    if not result.meshes:
        raise EmptyInputError("no region could be completed")
    result.scene = SceneEstimate.from_meshes(result.meshes, support_plane(cfg), cfg.viewpoints.render_plane)
    result.viewpoints = make_viewpoints(result.scene, cam, cfg, method)
    with _Timer(result.timings, "render"):
        bvh = build_bvh(result.scene)
        result.clean = [render_depth(result.scene, c, bvh) for c in result.viewpoints]
    with _Timer(result.timings, "noise"):
        if cfg.noise.enabled:
            result.noisy = [corrupt(img, cfg.noise.params(viewpoint_seed(seeds.noise, i)))
                            for i, img in enumerate(result.clean)]
        else:
            result.noisy = list(result.clean)
    with _Timer(result.timings, "plan"):
        result.candidates = plan_views(result.noisy, result.viewpoints.cameras, planner, cfg, result.scene, exclude)
    _select(result)
    return result


def run_pipeline(img: DepthImage, cam: CameraModel, cfg: PipelineConfig, method: str | None = None,
                 planner: GraspPlanner | None = None, exclude=()) -> PipelineResult:
    method = method or cfg.method
    if not img.valid.any():
        raise EmptyInputError("depth image has no valid pixels")
    if method == "real-view":
        return run_real_view(img, cam, cfg, planner, exclude)
    return run_from_cloud(depth_to_cloud(img, cam), cam, cfg, method, planner, exclude)


__all__ = ["COMPLETERS", "PipelineResult", "Seeds", "complete_region", "estimate_scene", "make_viewpoints",
           "plan_views", "run_from_cloud", "run_pipeline", "run_real_view", "support_plane"]
