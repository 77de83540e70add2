"""Command-line entry points.

Every command writes into a fresh run directory ``<out>/<config hash>-<UTC time>``
holding the artifacts and a ``manifest.json``; the directory path is printed
on stdout. Stage commands read each other's artifacts, and chaining
filter -> segment -> complete -> viewpoints -> render -> grasp reproduces
``plan`` bit for bit (the ``.npy`` depth dumps are lossless, the PNGs are
millimetre-quantized copies for viewing).

Exit codes: 0 ok, 2 bad input, 3 bad config, 4 no reachable grasp.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import io
from .config import METHODS, PipelineConfig, load_config
from .errors import (BadInputError, ConfigError, DegenerateRegionError, EmptyInputError, EmptySurfaceError,
                     InvalidArgumentError, LiftError, NoGraspError, PlacementError)
from .filtering import filter_cloud
from .geometry import CameraModel, DepthImage, PointCloud, Pose, depth_to_cloud
from .grasp import AntipodalPlanner, candidate_to_dict, select_best, write_candidates_csv
from .mesh import TriangleMesh
from .noise import corrupt, viewpoint_seed
from .pipeline import (PipelineResult, Seeds, complete_region, make_viewpoints, plan_views, run_from_cloud,
                       run_pipeline, support_plane)
from .renderer import SceneEstimate, SupportPlane, build_bvh, render_depth
from .segmentation import segment
from .viewpoints import ViewpointSet, default_intrinsics

EXIT_OK, EXIT_BAD_INPUT, EXIT_CONFIG, EXIT_NO_GRASP = 0, 2, 3, 4
LOG_LEVELS = {"quiet": logging.WARNING, "normal": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("scenegrasp")


# -- run directories -------------------------------------------------------

class RunDir:
    """Artifacts are staged in a hidden directory and only published on success."""

    def __init__(self, out: Path, cfg: PipelineConfig, command: str):
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
        name = f"{cfg.digest()}-{stamp}"
        out.mkdir(parents=True, exist_ok=True)
        self.final = out / name
        k = 1
        while self.final.exists():
            self.final = out / f"{name}-{k}"
            k += 1
        self.path = out / f".{self.final.name}.partial"
        self.path.mkdir()
        self.cfg, self.command = cfg, command
        self.files: list[str] = []

    def __truediv__(self, name: str) -> Path:
        self.files.append(name)
        return self.path / name

    def publish(self, status: str, exit_code: int, extra: dict | None = None) -> Path:
        files = {}
        for name in sorted(set(self.files)):
            p = self.path / name
            if p.exists():
                files[name] = hashlib.sha256(p.read_bytes()).hexdigest()
        manifest = {"command": self.command, "config_digest": self.cfg.digest(), "seed": self.cfg.seed,
                    "method": self.cfg.method, "status": status, "exit_code": exit_code, "files": files,
                    **(extra or {})}
        (self.path / "config.json").write_text(json.dumps(self.cfg.to_dict(), indent=2, sort_keys=True))
        (self.path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        self.path.rename(self.final)
        return self.final

    def discard(self) -> None:
        shutil.rmtree(self.path, ignore_errors=True)


# -- scene and input files -------------------------------------------------

def write_scene(run: RunDir, scene: SceneEstimate, prefix: str = "object") -> None:
    """One OBJ (full precision) and STL per object plus ``scene.json``."""
    objects = []
    for i, m in enumerate(scene.meshes):
        obj, stl = f"{prefix}_{i:03d}.obj", f"{prefix}_{i:03d}.stl"
        io.write_obj(run / obj, m.vertices, m.triangles)
        io.write_stl(run / stl, m.vertices, m.triangles)
        objects.append({"mesh": obj, "stl": stl, "pose": m.pose.to_dict()})
    normal, offset = scene.support_plane.as_tuple()
    doc = {"objects": objects, "support_plane": {"normal": normal.tolist(), "offset": offset},
           "render_plane": scene.render_plane}
    (run / "scene.json").write_text(json.dumps(doc, indent=2))


def read_scene(path) -> SceneEstimate:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        meshes = []
        for o in doc["objects"]:
            v, t = io.read_mesh(path.parent / o["mesh"])
            meshes.append(TriangleMesh(v, t, Pose.from_dict(o["pose"]) if "pose" in o else Pose()))
        sp = doc.get("support_plane", {})
        plane = SupportPlane(tuple(sp.get("normal", (0.0, 0.0, 1.0))), float(sp.get("offset", 0.0)))
        return SceneEstimate.from_meshes(meshes, plane, bool(doc.get("render_plane", True)))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise BadInputError(f"invalid scene file {path}: {exc}") from exc


def load_input(path, camera=None) -> tuple[DepthImage | None, PointCloud, CameraModel]:
    """Depth image (``.png`` or ``.npy`` with a JSON sidecar) or a world-frame cloud (``.pcd``/``.ply``).

    Clouds carry no intrinsics; ``camera`` (a sidecar) supplies them for the
    simulated views, otherwise the default camera is used.
    """
    path = Path(path)
    if not path.exists():
        raise BadInputError(f"input not found: {path}")
    suffix = path.suffix.lower()
    if suffix in (".png", ".npy"):
        sidecar = Path(camera) if camera else path.with_suffix(".json")
        cam, doc = io.read_sidecar(sidecar)
        if suffix == ".png":
            img = io.read_depth_png(path, doc.get("depth_scale", io.DEPTH_SCALE))
        else:
            try:
                img = io.read_raw_depth(path)
            except (OSError, ValueError) as exc:
                raise BadInputError(f"cannot read {path}: {exc}") from exc
        if not img.matches(cam):
            raise BadInputError(f"depth image {img.shape} does not match camera {cam.shape}")
        if not img.valid.any():
            raise EmptyInputError("depth image has no valid pixels")
        return img, depth_to_cloud(img, cam), cam
    if suffix in (".pcd", ".ply"):
        cloud = io.read_cloud(path)
        if cloud.frame != "world":
            raise BadInputError("point cloud input must be in the world frame")
        cam = io.read_sidecar(camera)[0] if camera else default_intrinsics()
        return None, cloud, cam
    raise BadInputError(f"unsupported input format {suffix!r}")


def write_views(run: RunDir, clean, noisy, cams) -> None:
    for i, cam in enumerate(cams):
        for tag, img in (("clean", clean[i]), ("noisy", noisy[i])):
            stem = f"view_{i:02d}_{tag}"
            io.write_depth_png(run / f"{stem}.png", img)
            io.write_sidecar(run / f"{stem}.json", cam, f"{stem}.png")
            io.write_raw_depth(run / f"{stem}.npy", img)


def write_grasps(run: RunDir, candidates, best) -> None:
    write_candidates_csv(run / "candidates.csv", [c for s in candidates for c in s])
    (run / "best_grasp.json").write_text(json.dumps(candidate_to_dict(best) if best else None, indent=2))


def write_regions(run: RunDir, regions: list[PointCloud]) -> None:
    for i, r in enumerate(regions):
        io.write_ply(run / f"region_{i:03d}.ply", r.points, frame=r.frame, origin=r.origin)


# -- commands --------------------------------------------------------------

def cmd_plan(args, cfg: PipelineConfig, run: RunDir) -> int:
    img, cloud, cam = load_input(args.input, args.camera)
    method = cfg.method
    io.write_sidecar(run / "input_camera.json", cam)
    if img is None:
        result = run_from_cloud(cloud, cam, cfg, method)
    else:
        result = run_pipeline(img, cam, cfg, method)
    if method == "real-view":
        write_views(run, result.clean, result.clean, [cam])
    else:
        _write_estimate(run, result, args)
        write_views(run, result.clean, result.noisy, result.viewpoints.cameras)
    write_grasps(run, result.candidates, result.best)
    _log_timings(result)
    if result.best is None:
        log.warning("no reachable grasp")
        return EXIT_NO_GRASP
    b = result.best
    log.info("best grasp: view %d, quality %.4f, position %s", b.viewpoint_index, b.quality,
             np.array2string(b.position, precision=4))
    return EXIT_OK


def _write_estimate(run: RunDir, result: PipelineResult, args) -> None:
    io.write_cloud(run / "filtered.pcd", result.filtered)
    write_regions(run, result.regions)
    write_scene(run, result.scene)
    result.viewpoints.save(run / "viewpoints.json")
    if args.log == "debug":
        for i, g in enumerate(result.grids):
            io.write_grid_rle(run / f"grid_{i:03d}.json", g.occupancy, g.voxel_size, g.origin)


def _log_timings(result: PipelineResult) -> None:
    for k, v in result.timings.items():
        log.info("%-10s %.3f s", k, v)


def cmd_filter(args, cfg: PipelineConfig, run: RunDir) -> int:
    _, cloud, cam = load_input(args.input, args.camera)
    filtered = filter_cloud(cloud, cfg.workspace)
    if len(filtered) == 0:
        raise EmptyInputError("no object points left after filtering")
    io.write_cloud(run / "filtered.pcd", filtered)
    io.write_sidecar(run / "input_camera.json", cam)
    log.info("kept %d of %d points", len(filtered), len(cloud))
    return EXIT_OK


def cmd_segment(args, cfg: PipelineConfig, run: RunDir) -> int:
    cloud = io.read_cloud(args.input)
    if len(cloud) == 0:
        raise EmptyInputError("cloud has no points")
    seg = segment(cloud, cfg.segmentation)
    regions = [cloud.subset(idx) for idx in seg.regions]
    write_regions(run, regions)
    labels = seg.labels(len(cloud))
    (run / "segmentation.json").write_text(json.dumps(
        {"n_points": len(cloud), "regions": [len(r) for r in regions], "labels": labels.tolist()}))
    log.info("%d regions", len(regions))
    return EXIT_OK


def cmd_complete(args, cfg: PipelineConfig, run: RunDir) -> int:
    """Complete regions given in segmentation order; a region's position in the list seeds its completion."""
    seeds = Seeds.from_master(cfg.seed)
    meshes = []
    for i, path in enumerate(args.regions):
        region = io.read_cloud(path)
        try:
            mesh, grid = complete_region(region, i, cfg, seeds)
        except (DegenerateRegionError, EmptySurfaceError) as exc:
            log.warning("region %d skipped: %s", i, exc)
            continue
        if args.log == "debug":
            io.write_grid_rle(run / f"grid_{i:03d}.json", grid.occupancy, grid.voxel_size, grid.origin)
        meshes.append(mesh)
    if not meshes:
        raise EmptyInputError("no region could be completed")
    write_scene(run, SceneEstimate.from_meshes(meshes, support_plane(cfg), cfg.viewpoints.render_plane))
    return EXIT_OK


def cmd_viewpoints(args, cfg: PipelineConfig, run: RunDir) -> int:
    scene = read_scene(args.scene)
    cam = io.read_sidecar(args.camera)[0] if args.camera else default_intrinsics()
    make_viewpoints(scene, cam, cfg, cfg.method).save(run / "viewpoints.json")
    return EXIT_OK


def cmd_render(args, cfg: PipelineConfig, run: RunDir) -> int:
    scene = read_scene(args.scene)
    try:
        views = ViewpointSet.load(args.viewpoints)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise BadInputError(f"invalid viewpoints file {args.viewpoints}: {exc}") from exc
    bvh = build_bvh(scene)
    clean = [render_depth(scene, c, bvh) for c in views]
    noise_seed = Seeds.from_master(cfg.seed).noise
    if cfg.noise.enabled:
        noisy = [corrupt(img, cfg.noise.params(viewpoint_seed(noise_seed, i))) for i, img in enumerate(clean)]
    else:
        noisy = list(clean)
    write_views(run, clean, noisy, views.cameras)
    return EXIT_OK


def cmd_grasp(args, cfg: PipelineConfig, run: RunDir) -> int:
    """Plan on rendered views (``view_XX_noisy.npy`` files in order) and select the best grasp."""
    images, cams = [], []
    for p in args.views:
        img, _, cam = load_input(p, None)
        images.append(img)
        cams.append(cam)
    scene = read_scene(args.scene) if args.scene else SceneEstimate((), support_plane(cfg))
    planner = AntipodalPlanner(cfg.planner, cfg.gripper)
    candidates = plan_views(images, cams, planner, cfg, scene)
    try:
        best = select_best(candidates)
    except NoGraspError:
        best = None
    write_grasps(run, candidates, best)
    return EXIT_OK if best is not None else EXIT_NO_GRASP


def cmd_scene(args, cfg: PipelineConfig, run: RunDir) -> int:
    """Synthetic ground-truth scene and its rendered "real" depth view."""
    from .harness.scenes import PRIMITIVES, SceneSpec, generate_scene
    objects = tuple(args.objects.split(","))
    unknown = [o for o in objects if o not in PRIMITIVES]
    if unknown:
        raise BadInputError(f"unknown object(s) {unknown}; choose from {sorted(PRIMITIVES)}")
    spec = SceneSpec(objects, random_drop=args.drop or len(objects) > 1, camera_elevation=args.elevation,
                     object_yaw=args.yaw, seed=cfg.seed, camera_distance=cfg.experiment.camera_distance)
    truth, cam = generate_scene(spec)
    img = render_depth(truth, cam)
    io.write_depth_png(run / "depth.png", img)
    io.write_sidecar(run / "depth.json", cam, "depth.png")
    io.write_raw_depth(run / "depth.npy", img)
    write_scene(run, truth, prefix="truth")
    return EXIT_OK


def cmd_experiment(args, cfg: PipelineConfig, run: RunDir) -> int:
    from .harness.experiment import aggregate, run_experiment, write_summary_csv, write_timings_csv, write_trials_json
    results = run_experiment(cfg, cfg.jobs)
    write_summary_csv(run / "summary.csv", results)
    write_timings_csv(run / "timings.csv", results)
    write_trials_json(run / "trials.json", results)
    for (setting, method), a in aggregate(results).items():
        line = (f"{setting:8s} {method:10s} n={a['n']:3d} success={a['success_rate']:.3f} "
                f"clearance={a['mean_clearance']:.3f} planning={a['planning_time_s']:.3f}s")
        if method != "real-view":
            line += f" completion={a['completion_time_s']:.3f}s"
        print(line)
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "filter": cmd_filter, "segment": cmd_segment, "complete": cmd_complete,
            "viewpoints": cmd_viewpoints, "render": cmd_render, "grasp": cmd_grasp, "scene": cmd_scene,
            "experiment": cmd_experiment}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--method", choices=METHODS, help="planning method (overrides the config)")
    common.add_argument("--out", help="parent directory for run directories (default: config output_dir)")
    common.add_argument("--jobs", type=int, help="worker processes for experiments")
    common.add_argument("--log", choices=sorted(LOG_LEVELS), default="normal",
                        help="quiet, normal or debug (debug also dumps voxel grids)")

    ap = argparse.ArgumentParser(prog="scenegrasp", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="full pipeline on one depth image or cloud")
    p.add_argument("input", help="depth .png/.npy with .json sidecar, or world-frame .pcd/.ply")
    p.add_argument("--camera", help="camera sidecar (intrinsics for cloud input, or a non-default sidecar)")

    p = sub.add_parser("filter", parents=[common], help="workspace filter -> filtered.pcd")
    p.add_argument("input")
    p.add_argument("--camera")

    p = sub.add_parser("segment", parents=[common], help="region growing -> region_XXX.ply")
    p.add_argument("input", help="world-frame .pcd/.ply")

    p = sub.add_parser("complete", parents=[common], help="shape completion -> scene.json + meshes")
    p.add_argument("regions", nargs="+", help="region clouds in segmentation order")

    p = sub.add_parser("viewpoints", parents=[common], help="simulated cameras -> viewpoints.json")
    p.add_argument("scene", help="scene.json")
    p.add_argument("--camera", help="sidecar whose intrinsics the views reuse")

    p = sub.add_parser("render", parents=[common], help="clean + noisy depth for each viewpoint")
    p.add_argument("scene")
    p.add_argument("viewpoints")

    p = sub.add_parser("grasp", parents=[common], help="plan on rendered views -> candidates.csv")
    p.add_argument("views", nargs="+", help="depth files in viewpoint order (sidecars alongside)")
    p.add_argument("--scene", help="scene.json for reachability checks")

    p = sub.add_parser("scene", parents=[common], help="synthetic scene + real-camera depth image")
    p.add_argument("--objects", default="cube", help="comma-separated primitive names")
    p.add_argument("--elevation", type=float, default=45.0)
    p.add_argument("--yaw", type=float, default=0.0)
    p.add_argument("--drop", action="store_true", help="random non-overlapping placement")

    sub.add_parser("experiment", parents=[common], help="run the evaluation harness")
    return ap


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.method is not None:
        changes["method"] = args.method
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        changes["jobs"] = args.jobs
    if args.out is not None:
        changes["output_dir"] = args.out
    return cfg.replace(**changes) if changes else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=LOG_LEVELS[args.log], format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    run = RunDir(Path(cfg.output_dir), cfg, args.command)
    try:
        code = COMMANDS[args.command](args, cfg, run)
    except ConfigError as exc:
        run.discard()
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (BadInputError, EmptyInputError, InvalidArgumentError, LiftError, PlacementError) as exc:
        run.discard()
        log.error("bad input: %s", exc)
        return EXIT_BAD_INPUT
    except BaseException:
        run.discard()
        raise
    status = {EXIT_OK: "ok", EXIT_NO_GRASP: "no-grasp"}[code]
    print(run.publish(status, code))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
