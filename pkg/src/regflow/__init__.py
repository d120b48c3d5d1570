"""Space-time luminance statistics and statistical-regularity optical flow.

The package measures how "regular" (close to Gaussian after divisive
normalization) displaced frame differences are, and turns that
regularity signal into motion estimates: per-patch displacement maps,
dense tiled flow fields and multi-frame trajectory searches, with a
classical iterative flow baseline and AE/EE evaluation alongside.
"""

from .evaluation import EvalReport, angular_error, endpoint_error, evaluate_field
from .horn_schunck import HsParams, horn_schunck
from .normalization import (
    KIND_MSCN,
    KIND_SDN,
    KIND_STDN,
    KIND_TDN,
    GaussianWindow,
    NormalizedVolume,
    divisive_normalize,
    gaussian_window,
    mscn,
    unit_variance,
)
from .regularity import (
    MotionEstimate,
    RegularityMap,
    displacement_range,
    estimate_flow_field,
    estimate_patch_motion,
    four_step_flow_field,
    four_step_trajectory_search,
    regularity_map,
)
from .stats import (
    DEFAULT_BINS,
    DEFAULT_RANGE,
    GgdFit,
    Histogram,
    gaussian_reference,
    ggd_fit,
    histogram,
    kld,
)
from .trajectories import (
    KIND_MOTION,
    KIND_NON_DISPLACED,
    KIND_RANDOM,
    Displacement,
    FrameDiffVolume,
    Trajectory,
    collect_volume,
    displaced_frame_difference,
    make_trajectory,
)
from .video_io import (
    FlowField,
    FrameSequence,
    load_frame_sequence,
    read_flo,
    write_flo,
    write_pgm,
    write_pgm16,
    write_raw_volume,
)

__version__ = "0.1.0"

__all__ = [
    "EvalReport", "angular_error", "endpoint_error", "evaluate_field",
    "HsParams", "horn_schunck",
    "KIND_MSCN", "KIND_SDN", "KIND_STDN", "KIND_TDN",
    "GaussianWindow", "NormalizedVolume", "divisive_normalize",
    "gaussian_window", "mscn", "unit_variance",
    "MotionEstimate", "RegularityMap", "displacement_range",
    "estimate_flow_field", "estimate_patch_motion", "four_step_flow_field",
    "four_step_trajectory_search", "regularity_map",
    "DEFAULT_BINS", "DEFAULT_RANGE", "GgdFit", "Histogram",
    "gaussian_reference", "ggd_fit", "histogram", "kld",
    "KIND_MOTION", "KIND_NON_DISPLACED", "KIND_RANDOM",
    "Displacement", "FrameDiffVolume", "Trajectory", "collect_volume",
    "displaced_frame_difference", "make_trajectory",
    "FlowField", "FrameSequence", "load_frame_sequence", "read_flo",
    "write_flo", "write_pgm", "write_pgm16", "write_raw_volume",
    "__version__",
]
