"""Noise-prediction contract and closed-form implementations.

A denoiser exposes predict_noise(z, i, cond) -> volume of z's shape. The
analytic Gaussian denoiser assumes per-condition data x0 ~ N(mu_c, sigma^2 I)
under the forward process z_i = sqrt(ab_i) x0 + sqrt(1-ab_i) eps and returns
the exact posterior mean of eps given z_i:

    E[eps | z] = sqrt(1-ab) * (z - sqrt(ab) * mu_c) / (ab*sigma^2 + 1 - ab)

which is affine in z, reduces to (z - sqrt(ab) mu)/sqrt(1-ab) as sigma -> 0,
and tends to z in the pure-noise limit ab -> 0. Condition ids are the argmax
coordinate of the conditioning vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol

import numpy as np

from .errors import ConditionError, DimensionError, DomainError, FormatError, NumericalError
from .schedule import NoiseSchedule
from .volume import LatentVolume, read_volume


@dataclass(frozen=True)
class ConditioningVector:
    """Fixed-length real embedding standing in for a text prompt."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise DimensionError("conditioning vector must be a non-empty 1-D sequence")
        if not np.isfinite(arr).all():
            raise NumericalError("conditioning vector contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def condition_id(self) -> int:
        return int(np.argmax(self.values))


class Denoiser(Protocol):
    def predict_noise(self, z: LatentVolume, i: int, cond: ConditioningVector) -> LatentVolume:
        ...


@dataclass(frozen=True)
class GaussianWorld:
    """Per-condition mean volumes and a shared data stddev."""

    means: Mapping[int, LatentVolume]
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.means:
            raise DomainError("GaussianWorld needs at least one condition mean")
        shapes = {m.shape for m in self.means.values()}
        if len(shapes) != 1:
            raise DimensionError(f"condition means must share one shape, got {shapes}")
        object.__setattr__(self, "means", dict(self.means))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return next(iter(self.means.values())).shape

    def mean(self, condition_id: int) -> LatentVolume:
        try:
            return self.means[condition_id]
        except KeyError:
            raise ConditionError(f"no mean registered for condition id {condition_id}") from None

    @classmethod
    def from_manifest(cls, path, sigma: float = 1.0) -> "GaussianWorld":
        """Load means from plain-text lines "condition_id path"; '#' comments
        and blank lines are skipped; relative paths resolve against the manifest."""
        path = Path(path)
        means: dict[int, LatentVolume] = {}
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(maxsplit=1)
            if len(parts) != 2 or not parts[0].lstrip("-").isdigit():
                raise FormatError(f"{path}:{lineno}: expected 'condition_id path', got {raw!r}")
            cid = int(parts[0])
            vol = read_volume((path.parent / parts[1]).resolve())
            if not isinstance(vol, LatentVolume):
                raise FormatError(f"{path}:{lineno}: {parts[1]} is not a latent container")
            if cid in means:
                raise FormatError(f"{path}:{lineno}: duplicate condition id {cid}")
            means[cid] = vol
        return cls(means, sigma)


class AnalyticGaussianDenoiser:
    """Exact posterior-mean noise for GaussianWorld data; affine in z."""

    def __init__(self, world: GaussianWorld, sched: NoiseSchedule):
        self.world = world
        self.sched = sched

    def predict_noise(self, z: LatentVolume, i: int, cond: ConditioningVector) -> LatentVolume:
        mu = self.world.mean(cond.condition_id)
        if mu.shape != z.shape:
            raise DimensionError(f"condition mean shape {mu.shape} does not match latent shape {z.shape}")
        a = self.sched.alpha_bar(i)
        denom = a * self.world.sigma ** 2 + (1.0 - a)
        return LatentVolume(np.sqrt(1.0 - a) * (z.data - np.sqrt(a) * mu.data) / denom)


class ZeroDenoiser:
    """Predicts no noise; makes the euler reverse step the identity."""

    def predict_noise(self, z: LatentVolume, i: int, cond: ConditioningVector) -> LatentVolume:
        return LatentVolume.zeros(z.shape)


class ConstantDenoiser:
    """Always predicts one fixed volume, whatever the state or step."""

    def __init__(self, eps: LatentVolume):
        self.eps = eps

    def predict_noise(self, z: LatentVolume, i: int, cond: ConditioningVector) -> LatentVolume:
        if self.eps.shape != z.shape:
            raise DimensionError(f"fixed noise shape {self.eps.shape} does not match latent shape {z.shape}")
        return self.eps


class ExactNoiseDenoiser:
    """Oracle that knows the clean latent and reports the exact noise component
    of z at level i; at level 0 the component is undefined and zero is returned."""

    def __init__(self, z0: LatentVolume, sched: NoiseSchedule):
        self.z0 = z0
        self.sched = sched

    def predict_noise(self, z: LatentVolume, i: int, cond: ConditioningVector) -> LatentVolume:
        if i == 0:
            return LatentVolume.zeros(z.shape)
        a = self.sched.alpha_bar(i)
        return LatentVolume((z.data - np.sqrt(a) * self.z0.data) / np.sqrt(1.0 - a))
