"""latentedit: noise-latent video editing at desk scale.

Editing runs entirely in latent space against a pluggable noise-prediction
contract: a source latent is mapped to an inversion trajectory, a start
state is assembled from a high-noise random branch (edited region) and a
low-noise inversion branch (unedited region) blended across a distance
transition zone, and denoising is steered by masked re-injection of
trajectory latents over a step window.
"""

__version__ = "0.1.0"

from .config import EditConfig, load_config, parse_config
from .denoise import (
    AnalyticGaussianDenoiser,
    ConditioningVector,
    ConstantDenoiser,
    ExactNoiseDenoiser,
    GaussianWorld,
    ZeroDenoiser,
)
from .eiam import PromptPair, embed_prompt
from .maskops import CoefficientField, DistanceField, coefficient_field, dilate, distance_transform
from .ngm import GuidanceWindow, guide_step, guided_denoise
from .pipeline import EditReport, compute_report, emit_preview, run_edit
from .schedule import (
    InversionTrajectory,
    NoiseSchedule,
    forward_noise,
    invert,
    read_trajectory,
    reverse_step,
    write_trajectory,
)
from .snis import SnisConfig, prepare_branches, structural_init
from .volume import (
    EditMask,
    LatentVolume,
    ShapeDescriptor,
    elementwise_lerp,
    masked_select,
    read_volume,
    write_volume,
)

__all__ = [
    "__version__",
    "AnalyticGaussianDenoiser",
    "CoefficientField",
    "ConditioningVector",
    "ConstantDenoiser",
    "DistanceField",
    "EditConfig",
    "EditMask",
    "EditReport",
    "ExactNoiseDenoiser",
    "GaussianWorld",
    "GuidanceWindow",
    "InversionTrajectory",
    "LatentVolume",
    "NoiseSchedule",
    "PromptPair",
    "ShapeDescriptor",
    "SnisConfig",
    "ZeroDenoiser",
    "coefficient_field",
    "compute_report",
    "dilate",
    "distance_transform",
    "elementwise_lerp",
    "embed_prompt",
    "emit_preview",
    "forward_noise",
    "guide_step",
    "guided_denoise",
    "invert",
    "load_config",
    "masked_select",
    "parse_config",
    "prepare_branches",
    "read_trajectory",
    "read_volume",
    "reverse_step",
    "run_edit",
    "structural_init",
    "write_trajectory",
    "write_volume",
]
