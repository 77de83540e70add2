"""Experiment driver: single-object trials and clutter clearance runs."""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..config import PipelineConfig
from ..errors import ScenegraspError
from ..grasp import GraspCandidate, candidate_to_dict
from ..noise import corrupt
from ..pipeline import run_pipeline
from ..renderer import SceneEstimate, build_bvh, render_depth
from .oracle import grasped_object, oracle_success
from .scenes import SceneSpec, generate_scene


@dataclass
class TrialResult:
    scene_id: int
    method: str
    setting: str              # "single" or "clutter"
    object: str
    elevation: float
    yaw: float
    grasp: GraspCandidate | None = None
    oracle_success: bool = False
    error: str = ""
    timings: dict = field(default_factory=dict)
    attempts: int = 0         # clutter only
    cleared: int = 0
    n_objects: int = 1

    @property
    def clearance_rate(self) -> float:
        return self.cleared / self.n_objects if self.n_objects else 0.0


def derive_seed(master: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(master), *[int(k) for k in keys]]).generate_state(1)[0])


def single_specs(cfg: PipelineConfig) -> list[tuple[str, float, float]]:
    ex = cfg.experiment
    combos = [(o, e, y) for e in ex.elevations for o in ex.objects for y in ex.yaws]
    return combos[:ex.max_trials] if ex.max_trials else combos


def observe(truth: SceneEstimate, cam, cfg: PipelineConfig, seed: int):
    img = render_depth(truth, cam)
    if cfg.experiment.real_noise:
        img = corrupt(img, cfg.noise.params(seed))
    return img


def attempt(truth: SceneEstimate, cam, method: str, cfg: PipelineConfig, seed: int, exclude=()):
    """One planning attempt -> (selected grasp or None, error text, stage timings)."""
    img = observe(truth, cam, cfg, derive_seed(seed, 1))
    run_cfg = cfg.replace(seed=seed, method=method)
    t0 = time.perf_counter()
    try:
        res = run_pipeline(img, cam, run_cfg, method, exclude=exclude)
        best, err, timings = res.best, "" if res.best is not None else "no-grasp", dict(res.timings)
    except ScenegraspError as exc:
        best, err, timings = None, f"{type(exc).__name__}: {exc}", {}
    timings["total"] = time.perf_counter() - t0
    return best, err, timings


def run_single_trial(args) -> list[TrialResult]:
    cfg, scene_id, obj, elevation, yaw = args
    ex = cfg.experiment
    truth, cam = generate_scene(SceneSpec((obj,), camera_elevation=elevation, object_yaw=yaw,
                                          camera_distance=ex.camera_distance))
    bvh = build_bvh(truth)
    seed = derive_seed(cfg.seed, scene_id)
    out = []
    for method in ex.methods:
        best, err, timings = attempt(truth, cam, method, cfg, seed)
        ok = best is not None and oracle_success(best, truth, ex.friction_mu, cfg.gripper, bvh)
        out.append(TrialResult(scene_id, method, "single", obj, elevation, yaw, best, ok, err, timings))
    return out


def run_clutter_scene(args) -> list[TrialResult]:
    cfg, scene_id = args
    ex = cfg.experiment
    objects = tuple(ex.objects[i % len(ex.objects)] for i in range(ex.clutter_objects))
    spec = SceneSpec(objects, random_drop=True, camera_elevation=ex.clutter_elevation,
                     seed=derive_seed(cfg.seed, 10_000 + scene_id), camera_distance=ex.camera_distance)
    initial, cam = generate_scene(spec)
    out = []
    for method in ex.methods:
        truth = initial
        failures, timings, cleared, attempts, last = [], {}, 0, 0, None
        err = ""
        while attempts < ex.budget and truth.objects:
            seed = derive_seed(cfg.seed, 10_000 + scene_id, attempts)
            best, err, t = attempt(truth, cam, method, cfg, seed, exclude=failures)
            for k, v in t.items():
                timings[k] = timings.get(k, 0.0) + v
            if best is None:
                break
            attempts += 1
            last = best
            bvh = build_bvh(truth)
            if oracle_success(best, truth, ex.friction_mu, cfg.gripper, bvh):
                truth = truth.without(grasped_object(best, truth, cfg.gripper, bvh))
                cleared += 1
            else:
                failures.append(best.position)
        out.append(TrialResult(scene_id, method, "clutter", "+".join(objects), ex.clutter_elevation, 0.0, last,
                               cleared == len(objects), err, timings, attempts, cleared, len(objects)))
    return out


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def run_experiment(cfg: PipelineConfig, jobs: int | None = None) -> list[TrialResult]:
    """All configured trials, ordered by (setting, scene id, method)."""
    jobs = cfg.jobs if jobs is None else jobs
    ex = cfg.experiment
    results: list[TrialResult] = []
    if ex.mode in ("single", "both"):
        items = [(cfg, i, o, e, y) for i, (o, e, y) in enumerate(single_specs(cfg))]
        for rs in _map(run_single_trial, items, jobs):
            results.extend(rs)
    if ex.mode in ("clutter", "both"):
        items = [(cfg, i) for i in range(ex.clutter_scenes)]
        for rs in _map(run_clutter_scene, items, jobs):
            results.extend(rs)
    return results


SUMMARY_COLUMNS = ["setting", "scene_id", "method", "object", "elevation_deg", "yaw_deg", "success", "status",
                   "attempts", "cleared", "clearance_rate", "viewpoint", "u", "v", "angle_rad", "quality",
                   "x", "y", "z"]
TIMING_COLUMNS = ["planning_time_s", "completion_time_s"]


def summary_row(r: TrialResult) -> dict:
    g = r.grasp
    row = {"setting": r.setting, "scene_id": r.scene_id, "method": r.method, "object": r.object,
           "elevation_deg": repr(float(r.elevation)), "yaw_deg": repr(float(r.yaw)),
           "success": int(r.oracle_success), "status": "ok" if not r.error else r.error.split(":")[0],
           "attempts": r.attempts, "cleared": r.cleared, "clearance_rate": repr(r.clearance_rate)}
    keys = ["viewpoint", "u", "v", "angle_rad", "quality", "x", "y", "z"]
    if g is None:
        row.update({k: "" for k in keys})
    else:
        p = g.position
        row.update({"viewpoint": g.viewpoint_index, "u": repr(g.u), "v": repr(g.v), "angle_rad": repr(g.angle),
                    "quality": repr(g.quality), "x": repr(float(p[0])), "y": repr(float(p[1])),
                    "z": repr(float(p[2]))})
    return row


def timing_row(r: TrialResult) -> dict:
    t = r.timings
    completion = t.get("segment", 0.0) + t.get("completion", 0.0)
    return {"planning_time_s": repr(t.get("total", 0.0)),
            "completion_time_s": repr(completion) if r.method != "real-view" else ""}


def write_summary_csv(path, results: list[TrialResult]) -> None:
    """Deterministic per-trial table (no wall-clock values)."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow(summary_row(r))


def write_timings_csv(path, results: list[TrialResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS + TIMING_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow({**summary_row(r), **timing_row(r)})


def write_trials_json(path, results: list[TrialResult]) -> None:
    data = []
    for r in results:
        d = summary_row(r)
        d["error"] = r.error
        d["timings"] = r.timings
        d["grasp"] = candidate_to_dict(r.grasp) if r.grasp is not None else None
        data.append(d)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)


def aggregate(results: list[TrialResult]) -> dict:
    """Per (setting, method): success rate, mean clearance and mean timings."""
    out: dict = {}
    for r in results:
        key = (r.setting, r.method)
        a = out.setdefault(key, {"n": 0, "success": 0, "clearance": 0.0, "planning_time_s": 0.0,
                                 "completion_time_s": 0.0})
        a["n"] += 1
        a["success"] += int(r.oracle_success)
        a["clearance"] += r.clearance_rate
        a["planning_time_s"] += r.timings.get("total", 0.0)
        a["completion_time_s"] += r.timings.get("segment", 0.0) + r.timings.get("completion", 0.0)
    for a in out.values():
        n = a["n"]
        a["success_rate"] = a["success"] / n
        a["mean_clearance"] = a["clearance"] / n
        a["planning_time_s"] /= n
        a["completion_time_s"] /= n
    return out


def success_rate(results: list[TrialResult], method: str, elevation: float | None = None) -> float:
    rs = [r for r in results if r.method == method and r.setting == "single"
          and (elevation is None or r.elevation == elevation)]
    return sum(r.oracle_success for r in rs) / len(rs) if rs else float("nan")


def mean_clearance(results: list[TrialResult], method: str) -> float:
    rs = [r for r in results if r.method == method and r.setting == "clutter"]
    return float(np.mean([r.clearance_rate for r in rs])) if rs else float("nan")


__all__ = ["SUMMARY_COLUMNS", "TIMING_COLUMNS", "TrialResult", "aggregate", "attempt", "derive_seed",
           "mean_clearance", "run_clutter_scene", "run_experiment", "run_single_trial", "single_specs",
           "success_rate", "write_summary_csv", "write_timings_csv", "write_trials_json"]
