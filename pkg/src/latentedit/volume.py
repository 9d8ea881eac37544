"""Core value types and the binary latent container.

A latent volume is a 4-D field of 64-bit reals laid out frame-major, then
channel, row, column (column fastest). Masks are per-frame binary fields
sharing the frame/spatial dims of their paired volume. Both are immutable
after construction and all module operations are pure, so values can be
shared freely across workers.

File container ("LATF"):

    bytes 0..3   magic "LATF"
    u32 LE       version, currently 1
    u32 LE       kind: 0 = latent, 1 = mask/planar field (channels must be 1)
    u32 LE x4    frames, channels, height, width
    f32 LE x N   payload, N = frames*channels*height*width, same layout

Internal precision is float64; the container quantizes to float32 at the
I/O boundary. Mask payloads binarize at 0.5 on load.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DimensionError, DomainError, FormatError, LengthError, NumericalError

MAGIC = b"LATF"
VERSION = 1
KIND_LATENT = 0
KIND_MASK = 1

_HEADER = struct.Struct("<4s6I")


@dataclass(frozen=True)
class ShapeDescriptor:
    frames: int
    channels: int
    height: int
    width: int

    def __post_init__(self):
        for name in ("frames", "channels", "height", "width"):
            if getattr(self, name) < 1:
                raise DimensionError(f"{name} must be >= 1, got {getattr(self, name)}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.frames, self.channels, self.height, self.width)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LatentVolume:
    """Immutable (frames, channels, height, width) field of finite float64."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 4:
            raise DimensionError(f"latent volume must be 4-D, got ndim={self.data.ndim}")
        if min(self.data.shape) < 1:
            raise DimensionError(f"zero-sized axis in shape {self.data.shape}")
        arr = _freeze(self.data)
        if not np.isfinite(arr).all():
            raise NumericalError("latent volume contains non-finite values")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "LatentVolume":
        return cls(np.array(arr, dtype=np.float64))

    @classmethod
    def zeros(cls, shape: tuple[int, int, int, int]) -> "LatentVolume":
        return cls(np.zeros(shape, dtype=np.float64))

    @classmethod
    def full(cls, shape: tuple[int, int, int, int], value: float) -> "LatentVolume":
        return cls(np.full(shape, value, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[2]

    @property
    def width(self) -> int:
        return self.data.shape[3]

    def describe(self) -> ShapeDescriptor:
        return ShapeDescriptor(*self.data.shape)


@dataclass(frozen=True)
class EditMask:
    """Immutable (frames, height, width) indicator field, values exactly 0 or 1."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise DimensionError(f"mask must be 3-D, got ndim={self.data.ndim}")
        if min(self.data.shape) < 1:
            raise DimensionError(f"zero-sized axis in shape {self.data.shape}")
        arr = _freeze(self.data)
        if not np.isin(arr, (0.0, 1.0)).all():
            raise DomainError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "EditMask":
        return cls(np.array(arr, dtype=np.float64))

    @classmethod
    def zeros(cls, shape: tuple[int, int, int]) -> "EditMask":
        return cls(np.zeros(shape, dtype=np.float64))

    @classmethod
    def ones(cls, shape: tuple[int, int, int]) -> "EditMask":
        return cls(np.ones(shape, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    def matches(self, volume: LatentVolume) -> bool:
        f, _, h, w = volume.shape
        return self.data.shape == (f, h, w)


Volume = Union[LatentVolume, EditMask]


def _check_same_shape(a: LatentVolume, b: LatentVolume):
    if a.shape != b.shape:
        raise DimensionError(f"volume shapes differ: {a.shape} vs {b.shape}")


def _weights_array(w, volume: LatentVolume) -> np.ndarray:
    """Normalize a blend weight (scalar, per-frame planar field, EditMask, or
    CoefficientField) to an array broadcastable over the channel axis."""
    if hasattr(w, "values"):  # CoefficientField
        w = w.values
    elif isinstance(w, EditMask):
        w = w.data
    if np.isscalar(w):
        arr = np.float64(w)
        if not (0.0 <= arr <= 1.0):
            raise DomainError(f"blend weight {arr} outside [0, 1]")
        return arr
    arr = np.asarray(w, dtype=np.float64)
    f, _, h, w_ = volume.shape
    if arr.shape != (f, h, w_):
        raise DimensionError(f"weight field shape {arr.shape} does not match frames/spatial dims {(f, h, w_)}")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise DomainError("blend weights outside [0, 1]")
    return arr[:, None, :, :]


def elementwise_lerp(a: LatentVolume, b: LatentVolume, w) -> LatentVolume:
    """Convex blend w*a + (1-w)*b, one weight per frame/pixel broadcast over
    channels. Weights exactly 0 or 1 select the operand bit-exactly."""
    _check_same_shape(a, b)
    wa = _weights_array(w, a)
    blend = wa * a.data + (1.0 - wa) * b.data
    out = np.where(wa == 1.0, a.data, np.where(wa == 0.0, b.data, blend))
    return LatentVolume(out)


def masked_select(keep_a: EditMask, a: LatentVolume, b: LatentVolume) -> LatentVolume:
    """a where the mask is 1, b where it is 0; exact selection, no arithmetic."""
    _check_same_shape(a, b)
    if not keep_a.matches(a):
        raise DimensionError(f"mask shape {keep_a.shape} does not match volume shape {a.shape}")
    sel = keep_a.data[:, None, :, :] == 1.0
    return LatentVolume(np.where(sel, a.data, b.data))


# --- container I/O ---------------------------------------------------------


def volume_to_bytes(volume: Volume) -> bytes:
    if isinstance(volume, EditMask):
        kind = KIND_MASK
        f, h, w = volume.shape
        dims = (f, 1, h, w)
        payload = volume.data
    else:
        kind = KIND_LATENT
        dims = volume.shape
        payload = volume.data
    header = _HEADER.pack(MAGIC, VERSION, kind, *dims)
    return header + np.ascontiguousarray(payload, dtype="<f4").tobytes()


def field_to_bytes(values: np.ndarray) -> bytes:
    """Serialize a per-frame planar field in [0, 1] (e.g. a coefficient field)
    as a kind=1 container."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"planar field must be 3-D, got ndim={arr.ndim}")
    f, h, w = arr.shape
    header = _HEADER.pack(MAGIC, VERSION, KIND_MASK, f, 1, h, w)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _parse_header(blob: bytes, source: str):
    if len(blob) < _HEADER.size:
        raise LengthError(f"{source}: truncated header ({len(blob)} bytes)")
    magic, version, kind, f, c, h, w = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    if kind not in (KIND_LATENT, KIND_MASK):
        raise FormatError(f"{source}: unknown kind {kind}")
    if min(f, c, h, w) < 1:
        raise FormatError(f"{source}: bad dims {(f, c, h, w)}")
    if kind == KIND_MASK and c != 1:
        raise FormatError(f"{source}: mask container must have channels=1, got {c}")
    return kind, (f, c, h, w)


def _parse_payload(blob: bytes, dims, source: str) -> np.ndarray:
    n = dims[0] * dims[1] * dims[2] * dims[3]
    body = blob[_HEADER.size:]
    if len(body) != 4 * n:
        raise LengthError(f"{source}: payload holds {len(body) // 4} values, header promises {n}")
    values = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(dims)
    if not np.isfinite(values).all():
        raise FormatError(f"{source}: non-finite payload values")
    return values


def volume_from_bytes(blob: bytes, source: str = "<bytes>") -> Volume:
    kind, dims = _parse_header(blob, source)
    values = _parse_payload(blob, dims, source)
    if kind == KIND_MASK:
        binary = np.where(values >= 0.5, 1.0, 0.0)
        return EditMask(binary[:, 0, :, :])
    return LatentVolume(values)


def field_from_bytes(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    """Read a kind=1 container without binarization (coefficient fields)."""
    kind, dims = _parse_header(blob, source)
    if kind != KIND_MASK:
        raise FormatError(f"{source}: expected a kind=1 field container, got kind={kind}")
    return _parse_payload(blob, dims, source)[:, 0, :, :]


def read_volume(path) -> Volume:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc})") from exc
    return volume_from_bytes(blob, source=str(path))


def write_volume(path, volume: Volume) -> None:
    Path(path).write_bytes(volume_to_bytes(volume))


def read_field(path) -> np.ndarray:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc})") from exc
    return field_from_bytes(blob, source=str(path))


def write_field(path, values: np.ndarray) -> None:
    Path(path).write_bytes(field_to_bytes(values))
