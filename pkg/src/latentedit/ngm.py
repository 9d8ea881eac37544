"""Noise guidance: masked re-injection of inversion-trajectory latents.

After each denoising step whose resulting noise level i falls inside the
guidance window, the unedited region of the state is replaced by the
trajectory entry at that same level, anchoring the background to the
source while the edited region keeps its denoised content. Below the
window the state denoises jointly with no replacement, which lets the
model refine effects (shadows, reflections) that spill outside the mask.

Trajectory entries are matched at the level the state occupies after the
step; `alignment="pre"` selects the off-by-one alternative in which the
entry at the pre-step level is injected instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .denoise import ConditioningVector, Denoiser
from .errors import DomainError
from .schedule import InversionTrajectory, NoiseSchedule, reverse_step
from .volume import EditMask, LatentVolume, masked_select

ALIGNMENTS = ("post", "pre")


@dataclass(frozen=True)
class GuidanceWindow:
    """Inclusive step-index interval [lo, hi] in which guidance is active."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError(f"window lo {self.lo} exceeds hi {self.hi}")
        if self.lo < 0:
            raise DomainError(f"window lo must be >= 0, got {self.lo}")

    @classmethod
    def from_fractions(cls, alpha: float, beta: float, total_steps: int) -> "GuidanceWindow":
        if not 0.0 < alpha <= beta <= 1.0:
            raise DomainError(f"need 0 < alpha <= beta <= 1, got alpha={alpha}, beta={beta}")
        return cls(math.ceil(alpha * total_steps), math.floor(beta * total_steps))

    def contains(self, i: int) -> bool:
        return self.lo <= i <= self.hi


def guide_step(
    z_bar: LatentVolume,
    trajectory: InversionTrajectory,
    mask: EditMask,
    i: int,
    window: GuidanceWindow | None,
) -> LatentVolume:
    """Replace the unedited region with the trajectory entry at level i when i
    is inside the window; otherwise return the state untouched."""
    if window is None or not window.contains(i):
        return z_bar
    return masked_select(mask, z_bar, trajectory.entry(i))


def guided_denoise(
    z_hat_t: LatentVolume,
    t_start: int,
    trajectory: InversionTrajectory,
    mask: EditMask,
    window: GuidanceWindow | None,
    denoiser: Denoiser,
    cond_target: ConditioningVector,
    sched: NoiseSchedule,
    sampler: str,
    alignment: str = "post",
) -> LatentVolume:
    """Denoise from t_start to 0, applying guidance after each step."""
    if alignment not in ALIGNMENTS:
        raise DomainError(f"alignment must be one of {ALIGNMENTS}, got {alignment!r}")
    if not 0 <= t_start <= sched.total_steps:
        raise DomainError(f"t_start {t_start} outside [0, {sched.total_steps}]")
    z = z_hat_t
    for i in range(t_start, 0, -1):
        z = reverse_step(z, i, denoiser, cond_target, sampler, sched)
        level = i - 1 if alignment == "post" else i
        z = guide_step(z, trajectory, mask, level, window)
    return z
