"""Light-field densification by sparse EPI regularization in a shearlet frame."""

from .filterbank import FanFilter, FilterPair1D, cascade_filters, cascade_response
from .lightfield import (
    CameraGeometry,
    LightField,
    camera_step_bound,
    disparity,
    extract_epi,
    insert_epi,
    psnr,
    reconstruct_full_parallax,
    reconstruct_hpo,
    refocus,
)
from .reconstruct import (
    DivergenceError,
    IterationParams,
    SamplingMask,
    adaptive_alpha,
    build_mask,
    hard_threshold,
    lambda_schedule,
    reconstruct_epi,
    reconstruct_views,
)
from .shearlet import (
    LOWPASS,
    ShearletSystem,
    analyze,
    build_system,
    digital_shear,
    element_count,
    frame_bounds,
    synthesize,
)

__version__ = "0.1.0"
