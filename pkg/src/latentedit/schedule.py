"""Noise schedules, the forward noising map, deterministic reverse steps,
and trajectory construction by inversion.

The signal-retention sequence alpha_bar indexes inference steps 0..T with
alpha_bar[0] = 1 (clean) down to alpha_bar[T] <= 1e-3 (pure noise) for the
default linear-beta schedule. The linear schedule is the conventional
1000-step beta grid [1e-4, 2e-2] resampled to T inference steps, so total
noise injection does not depend on T.

Two reverse updates are supported:

    euler:  z[i-1] = z[i] - eps_hat(z[i], i)
    ddim:   predict x0 from eps_hat, re-noise to level i-1 deterministically

Inversion runs the chosen update backwards with the first-order
approximation eps_hat(z[i-1], i) for the unknown eps_hat(z[i], i); no
corrector iterations are applied.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    FormatError,
    LengthError,
    NumericalError,
    TrajectoryError,
)
from .volume import LatentVolume, _HEADER, volume_from_bytes, volume_to_bytes

SAMPLERS = ("euler", "ddim")
SCHEDULES = ("linear", "cosine")

_REF_STEPS = 1000
_BETA_LO = 1e-4
_BETA_HI = 2e-2


def _reference_log_alpha_bar() -> np.ndarray:
    betas = np.linspace(_BETA_LO, _BETA_HI, _REF_STEPS)
    return np.concatenate([[0.0], np.cumsum(np.log1p(-betas))])


_REF_LOG_AB = _reference_log_alpha_bar()


@dataclass(frozen=True)
class NoiseSchedule:
    """Total inference steps T and the retention sequence alpha_bar[0..T]."""

    total_steps: int
    alphas_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alphas_bar, dtype=np.float64)
        if self.total_steps < 1:
            raise DomainError(f"total_steps must be >= 1, got {self.total_steps}")
        if ab.shape != (self.total_steps + 1,):
            raise DimensionError(f"alphas_bar must have length T+1={self.total_steps + 1}, got {ab.shape}")
        if ab[0] != 1.0:
            raise DomainError("alphas_bar[0] must be exactly 1")
        if not (np.diff(ab) < 0).all():
            raise DomainError("alphas_bar must be strictly decreasing")
        if ab[-1] <= 0.0 or ab.max() > 1.0:
            raise DomainError("alphas_bar values must lie in (0, 1]")
        ab.flags.writeable = False
        object.__setattr__(self, "alphas_bar", ab)

    @classmethod
    def linear(cls, total_steps: int) -> "NoiseSchedule":
        if total_steps < 1:
            raise DomainError(f"total_steps must be >= 1, got {total_steps}")
        # resample the 1000-step reference grid, log-interpolating between nodes
        pos = np.arange(total_steps + 1) * (_REF_STEPS / total_steps)
        lo = np.minimum(np.floor(pos).astype(int), _REF_STEPS - 1)
        frac = pos - lo
        log_ab = _REF_LOG_AB[lo] * (1.0 - frac) + _REF_LOG_AB[lo + 1] * frac
        ab = np.exp(log_ab)
        ab[0] = 1.0
        return cls(total_steps, ab)

    @classmethod
    def cosine(cls, total_steps: int, offset: float = 0.008) -> "NoiseSchedule":
        if total_steps < 1:
            raise DomainError(f"total_steps must be >= 1, got {total_steps}")
        i = np.arange(total_steps + 1)
        f = np.cos((i / total_steps + offset) / (1.0 + offset) * np.pi / 2.0) ** 2
        ab = f / f[0]
        betas = np.clip(1.0 - ab[1:] / ab[:-1], 0.0, 0.999)
        ab = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        return cls(total_steps, ab)

    @classmethod
    def make(cls, kind: str, total_steps: int) -> "NoiseSchedule":
        if kind == "linear":
            return cls.linear(total_steps)
        if kind == "cosine":
            return cls.cosine(total_steps)
        raise DomainError(f"unknown schedule kind {kind!r} (expected one of {SCHEDULES})")

    def alpha_bar(self, i: int) -> float:
        if not 0 <= i <= self.total_steps:
            raise DomainError(f"step index {i} outside [0, {self.total_steps}]")
        return float(self.alphas_bar[i])


def _check_sampler(sampler: str):
    if sampler not in SAMPLERS:
        raise DomainError(f"unknown sampler {sampler!r} (expected one of {SAMPLERS})")


def forward_noise(z0: LatentVolume, t: int, eps: LatentVolume, sched: NoiseSchedule) -> LatentVolume:
    """Closed-form noising: sqrt(ab[t])*z0 + sqrt(1-ab[t])*eps."""
    if not 0 <= t <= sched.total_steps:
        raise DomainError(f"step index {t} outside [0, {sched.total_steps}]")
    if z0.shape != eps.shape:
        raise DimensionError(f"eps shape {eps.shape} does not match z0 shape {z0.shape}")
    a = sched.alpha_bar(t)
    return LatentVolume(np.sqrt(a) * z0.data + np.sqrt(1.0 - a) * eps.data)


def _predict(denoiser, z: LatentVolume, i: int, cond) -> np.ndarray:
    eps = denoiser.predict_noise(z, i, cond)
    if not isinstance(eps, LatentVolume):
        raise NumericalError(f"denoiser must return a LatentVolume, got {type(eps).__name__}")
    if eps.shape != z.shape:
        raise DimensionError(f"denoiser changed shape: {eps.shape} vs {z.shape}")
    return eps.data


def reverse_step(z: LatentVolume, i: int, denoiser, cond, sampler: str, sched: NoiseSchedule) -> LatentVolume:
    """One deterministic denoising step from level i to level i-1."""
    _check_sampler(sampler)
    if not 1 <= i <= sched.total_steps:
        raise DomainError(f"reverse step index {i} outside [1, {sched.total_steps}]")
    eps = _predict(denoiser, z, i, cond)
    if sampler == "euler":
        return LatentVolume(z.data - eps)
    a_cur = sched.alpha_bar(i)
    a_prev = sched.alpha_bar(i - 1)
    x0 = (z.data - np.sqrt(1.0 - a_cur) * eps) / np.sqrt(a_cur)
    return LatentVolume(np.sqrt(a_prev) * x0 + np.sqrt(1.0 - a_prev) * eps)


def _invert_step(z_prev: LatentVolume, i: int, denoiser, cond, sampler: str, sched: NoiseSchedule) -> LatentVolume:
    # inverse of reverse_step(., i), with eps evaluated at the known lower
    # level latent but the target index i (first-order eps reuse)
    eps = _predict(denoiser, z_prev, i, cond)
    if sampler == "euler":
        return LatentVolume(z_prev.data + eps)
    a_cur = sched.alpha_bar(i)
    a_prev = sched.alpha_bar(i - 1)
    x0 = (z_prev.data - np.sqrt(1.0 - a_prev) * eps) / np.sqrt(a_prev)
    return LatentVolume(np.sqrt(a_cur) * x0 + np.sqrt(1.0 - a_cur) * eps)


@dataclass(frozen=True)
class InversionTrajectory:
    """Latents z_0..z_N at increasing noise levels; entry 0 is the clean latent."""

    volumes: tuple[LatentVolume, ...]

    def __post_init__(self):
        if not self.volumes:
            raise TrajectoryError("trajectory must contain at least the clean latent")
        shape = self.volumes[0].shape
        for v in self.volumes:
            if v.shape != shape:
                raise DimensionError("trajectory entries must share one shape")

    @property
    def up_to(self) -> int:
        return len(self.volumes) - 1

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.volumes[0].shape

    def has_entry(self, i: int) -> bool:
        return 0 <= i <= self.up_to

    def entry(self, i: int) -> LatentVolume:
        if not self.has_entry(i):
            raise TrajectoryError(f"trajectory entry {i} missing (have 0..{self.up_to})")
        return self.volumes[i]


def invert(z0: LatentVolume, up_to: int, denoiser, cond, sampler: str, sched: NoiseSchedule) -> InversionTrajectory:
    """Map a clean latent to noise levels 1..up_to, recording every entry."""
    _check_sampler(sampler)
    if not 0 <= up_to <= sched.total_steps:
        raise DomainError(f"up_to {up_to} outside [0, {sched.total_steps}]")
    entries = [z0]
    z = z0
    for i in range(1, up_to + 1):
        z = _invert_step(z, i, denoiser, cond, sampler, sched)
        entries.append(z)
    return InversionTrajectory(tuple(entries))


# --- trajectory container ---------------------------------------------------
# "LTRJ", u32 version=1, u32 count, then count entries of
# (u32 step index, embedded LATF latent container).

TRAJ_MAGIC = b"LTRJ"
_TRAJ_HEADER = struct.Struct("<4sII")
_U32 = struct.Struct("<I")


def trajectory_to_bytes(traj: InversionTrajectory) -> bytes:
    parts = [_TRAJ_HEADER.pack(TRAJ_MAGIC, 1, len(traj.volumes))]
    for i, vol in enumerate(traj.volumes):
        parts.append(_U32.pack(i))
        parts.append(volume_to_bytes(vol))
    return b"".join(parts)


def trajectory_from_bytes(blob: bytes, source: str = "<bytes>") -> InversionTrajectory:
    if len(blob) < _TRAJ_HEADER.size:
        raise LengthError(f"{source}: truncated trajectory header")
    magic, version, count = _TRAJ_HEADER.unpack_from(blob)
    if magic != TRAJ_MAGIC:
        raise FormatError(f"{source}: bad trajectory magic {magic!r}")
    if version != 1:
        raise FormatError(f"{source}: unsupported trajectory version {version}")
    offset = _TRAJ_HEADER.size
    volumes = []
    for expect in range(count):
        if len(blob) < offset + _U32.size + _HEADER.size:
            raise LengthError(f"{source}: truncated at entry {expect}")
        (step,) = _U32.unpack_from(blob, offset)
        if step != expect:
            raise FormatError(f"{source}: entry {expect} carries step index {step}")
        offset += _U32.size
        dims = _HEADER.unpack_from(blob, offset)[3:]
        size = _HEADER.size + 4 * int(np.prod(dims))
        entry = volume_from_bytes(blob[offset:offset + size], source=f"{source}[{expect}]")
        if not isinstance(entry, LatentVolume):
            raise FormatError(f"{source}: trajectory entry {expect} is not a latent container")
        volumes.append(entry)
        offset += size
    if offset != len(blob):
        raise LengthError(f"{source}: {len(blob) - offset} trailing bytes")
    return InversionTrajectory(tuple(volumes))


def read_trajectory(path) -> InversionTrajectory:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc})") from exc
    return trajectory_from_bytes(blob, source=str(path))


def write_trajectory(path, traj: InversionTrajectory) -> None:
    Path(path).write_bytes(trajectory_to_bytes(traj))
