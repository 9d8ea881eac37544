"""Exact Euclidean distance transforms and the blend-coefficient field.

Distances are computed per frame in 2-D with the two-pass separable
lower-envelope algorithm on squared distances: a column scan produces the
vertical distance to the nearest mask pixel, then each row takes the lower
envelope of the parabolas (x - q)^2 + f(q). All intermediate squared
distances are small integers, so results match the all-pairs brute force
exactly, not just within tolerance.

The coefficient field decays linearly from 1 on the mask to 0 at distance
m and stays 0 beyond the transition zone. The published piecewise form
reads "1" outside the zone, which would hand the far background to the
random-noise branch; the corrected branch is the default and the literal
reading stays available behind `literal_tail`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .volume import EditMask

_COL_INF = 1 << 20  # dominates any real pixel distance at supported sizes


@dataclass(frozen=True)
class DistanceField:
    """Per-frame minimal Euclidean distance to the mask, inf on empty frames."""

    distances: np.ndarray
    empty_frames: tuple[bool, ...]

    def __post_init__(self):
        arr = np.ascontiguousarray(self.distances, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionError(f"distance field must be 3-D, got ndim={arr.ndim}")
        if len(self.empty_frames) != arr.shape[0]:
            raise DimensionError("empty_frames length must equal the frame count")
        arr.flags.writeable = False
        object.__setattr__(self, "distances", arr)
        object.__setattr__(self, "empty_frames", tuple(bool(e) for e in self.empty_frames))


@dataclass(frozen=True)
class CoefficientField:
    """Blend weights D in [0, 1] with the transition width m that produced them."""

    values: np.ndarray
    m: float

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionError(f"coefficient field must be 3-D, got ndim={arr.ndim}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise DomainError("coefficient values outside [0, 1]")
        if self.m <= 0:
            raise DomainError(f"transition width must be positive, got {self.m}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


def _envelope_row(f: np.ndarray) -> np.ndarray:
    """1-D squared-distance transform: min_q (p - q)^2 + f(q)."""
    n = f.shape[0]
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1, dtype=np.float64)
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    k = 0
    for q in range(1, n):
        fq = f[q] + q * q
        s = (fq - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        while s <= z[k]:
            k -= 1
            s = (fq - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    out = np.empty(n, dtype=np.float64)
    k = 0
    for p in range(n):
        while z[k + 1] < p:
            k += 1
        out[p] = (p - v[k]) ** 2 + f[v[k]]
    return out


def _edt_frame(mask2d: np.ndarray) -> np.ndarray:
    h, w = mask2d.shape
    col = np.full((h, w), _COL_INF, dtype=np.int64)
    col[mask2d == 1.0] = 0
    for i in range(1, h):
        np.minimum(col[i], col[i - 1] + 1, out=col[i])
    for i in range(h - 2, -1, -1):
        np.minimum(col[i], col[i + 1] + 1, out=col[i])
    f = col.astype(np.float64) ** 2
    sq = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        sq[i] = _envelope_row(f[i])
    return np.sqrt(sq)


def distance_transform(mask: EditMask) -> DistanceField:
    """Exact per-frame Euclidean distances to the mask-1 region."""
    frames, h, w = mask.shape
    distances = np.empty((frames, h, w), dtype=np.float64)
    empty = []
    for fr in range(frames):
        plane = mask.data[fr]
        if not plane.any():
            distances[fr] = np.inf
            empty.append(True)
        else:
            distances[fr] = _edt_frame(plane)
            empty.append(False)
    return DistanceField(distances, tuple(empty))


def coefficient_field(dist: DistanceField, m: float, literal_tail: bool = False) -> CoefficientField:
    """Linear-decay blend weights: 1 on the mask, 0 from distance m outward.

    literal_tail=True restores the published "otherwise -> 1" branch, in which
    the far field (and any empty frame, where d is infinite) gets weight 1.
    """
    if m <= 0:
        raise DomainError(f"transition width must be positive, got {m}")
    d = dist.distances
    if literal_tail:
        values = np.where(d <= m, (m - d) / m, 1.0)
    else:
        values = np.maximum(m - d, 0.0) / m
    return CoefficientField(values, float(m))


def dilate(mask: EditMask, radius: float) -> EditMask:
    """Grow the mask to every pixel within `radius` (Euclidean, inclusive)."""
    if radius < 0:
        raise DomainError(f"dilation radius must be >= 0, got {radius}")
    if radius == 0:
        return mask
    d = distance_transform(mask).distances
    return EditMask(np.where(d <= radius, 1.0, 0.0))
