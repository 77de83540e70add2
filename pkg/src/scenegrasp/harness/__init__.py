"""Synthetic scenes, the grasp-success oracle and experiment drivers."""
from .experiment import (TrialResult, aggregate, mean_clearance, run_experiment, success_rate,
                         write_summary_csv, write_timings_csv, write_trials_json)
from .oracle import grasped_object, oracle_success
from .scenes import PRIMITIVES, ObjectSpec, SceneSpec, aabbs_disjoint, generate_scene

__all__ = [
    "ObjectSpec", "PRIMITIVES", "SceneSpec", "TrialResult", "aabbs_disjoint", "aggregate", "generate_scene",
    "grasped_object", "mean_clearance", "oracle_success", "run_experiment", "success_rate",
    "write_summary_csv", "write_timings_csv", "write_trials_json",
]
