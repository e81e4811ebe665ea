"""stitchkit: needle pose estimation, suture planning and suturing-trial simulation.

The geometry and estimation code works on plain numpy arrays in millimetres.
Hot raster/cloud kernels use a compiled extension when available and a
numpy fallback otherwise (see :mod:`stitchkit.kernels`).
"""

from .camera import CameraModel
from .controller import (
    InsertionConfig,
    SweepConfig,
    Waypoint,
    cinch_translation,
    extraction_grasp,
    handover_alignment,
    handover_grasp,
    insertion_trajectory,
    pre_insertion_alignment,
    thread_sweep_trajectory,
)
from .errors import StitchError
from .geom3d import Circle3, Line3, Plane, Pose, RansacConfig, Ray3
from .harness import MetricsReport, TrialConfig, TrialResult, aggregate, run_experiment, run_trial
from .kernels import BACKEND
from .needle import (
    EkfConfig,
    NeedleMeasurement,
    estimate_needle,
    measure_needle,
    refine_tip,
)
from .planner import SuturePlan, WoundModel, WoundScene, build_wound_model, plan_sutures
from .synth import NeedleGroundTruth, NoiseModel, WoundSceneParams, generate_wound_scene

__version__ = "0.1.0"
