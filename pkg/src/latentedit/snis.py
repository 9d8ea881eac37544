"""Structural noise initialization: two noisy branches blended by distance.

The random branch noises the (optionally inpainted) source to level
t_start + tau with a seeded Gaussian draw, then pre-denoises tau steps under
the target conditioning so both branches meet at level t_start; the noise
level of the random branch therefore never falls below the inversion
branch's level. The inversion branch is the trajectory entry at t_start,
taken from a DDIM inversion of the original source (or of the inpainted
source when `invert_inpainted` is set).

The blend weights come from the mask's distance field: weight 1 on the
edited region, linear decay across the transition zone, weight 0 beyond it,
so the start state equals the random branch on the mask and the inversion
branch outside the zone, exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from . import rng
from .denoise import ConditioningVector, Denoiser
from .errors import ConfigError, DimensionError
from .inpaint import external_inpaint, naive_inpaint
from .maskops import coefficient_field, dilate, distance_transform
from .schedule import InversionTrajectory, NoiseSchedule, forward_noise, invert, reverse_step
from .volume import EditMask, LatentVolume, elementwise_lerp

INPAINT_MODES = ("none", "naive", "external")
INPAINT_DILATION = 2.0  # latent pixels; covers halo artifacts around coarse masks


@dataclass(frozen=True)
class SnisConfig:
    t_start: int
    tau: int
    transition_width: float
    seed: int
    inpaint: str = "none"
    inpaint_url: str | None = None
    invert_inpainted: bool = False
    literal_coefficient_tail: bool = False

    def __post_init__(self):
        if self.t_start < 0:
            raise ConfigError(f"t_start must be >= 0, got {self.t_start}")
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if self.transition_width <= 0:
            raise ConfigError(f"transition_width must be positive, got {self.transition_width}")
        if self.inpaint not in INPAINT_MODES:
            raise ConfigError(f"inpaint must be one of {INPAINT_MODES}, got {self.inpaint!r}")
        if self.inpaint == "external" and not self.inpaint_url:
            raise ConfigError("inpaint=external requires inpaint_url")


class SnisBranches(NamedTuple):
    z_star_t: LatentVolume
    z_t: LatentVolume
    trajectory: InversionTrajectory


def _inpainted_source(z0: LatentVolume, mask: EditMask, cfg: SnisConfig) -> LatentVolume:
    if cfg.inpaint == "none":
        return z0
    grown = dilate(mask, INPAINT_DILATION)
    if cfg.inpaint == "naive":
        return naive_inpaint(z0, grown).volume
    return external_inpaint(z0, grown, cfg.inpaint_url)


def prepare_branches(
    z0: LatentVolume,
    mask: EditMask,
    cfg: SnisConfig,
    denoiser: Denoiser,
    cond_target: ConditioningVector,
    sched: NoiseSchedule,
    sampler: str,
    invert_up_to: int | None = None,
) -> SnisBranches:
    """Build the random branch z*_t, the inversion branch z_t, and the full
    inversion trajectory (up to max(t_start, invert_up_to))."""
    if cfg.t_start + cfg.tau > sched.total_steps:
        raise ConfigError(f"t_start + tau = {cfg.t_start + cfg.tau} exceeds total steps {sched.total_steps}")
    if not mask.matches(z0):
        raise DimensionError(f"mask shape {mask.shape} does not match source shape {z0.shape}")

    source = _inpainted_source(z0, mask, cfg)

    eps = LatentVolume(rng.gaussian(cfg.seed, rng.STREAM_SNIS_NOISE, z0.shape))
    z_hi = forward_noise(source, cfg.t_start + cfg.tau, eps, sched)
    for j in range(cfg.t_start + cfg.tau, cfg.t_start, -1):
        z_hi = reverse_step(z_hi, j, denoiser, cond_target, sampler, sched)

    up_to = cfg.t_start if invert_up_to is None else max(cfg.t_start, invert_up_to)
    inversion_source = source if cfg.invert_inpainted else z0
    trajectory = invert(inversion_source, up_to, denoiser, cond_target, sampler, sched)

    return SnisBranches(z_hi, trajectory.entry(cfg.t_start), trajectory)


def structural_init(
    z_star_t: LatentVolume,
    z_t: LatentVolume,
    mask: EditMask,
    m: float,
    literal_tail: bool = False,
) -> LatentVolume:
    """Blend the branches with the distance-based coefficient field."""
    if not mask.matches(z_star_t):
        raise DimensionError(f"mask shape {mask.shape} does not match branch shape {z_star_t.shape}")
    weights = coefficient_field(distance_transform(mask), m, literal_tail=literal_tail)
    return elementwise_lerp(z_star_t, z_t, weights)
