"""Mask-region fills used to prepare the random-noise branch.

The shipped fill is harmonic: masked pixels relax to the average of their
4-neighbors (Jacobi sweeps) with unmasked pixels held fixed as Dirichlet
data, iterated until the relative update drops below 1e-6. Harmonic
extension of an affine boundary is affine, which the tests exploit.

An external fill can be delegated over HTTP: POST /inpaint with base64
latent and mask containers, response body a filled latent container. The
response is spliced against the input so the hook contract (untouched
pixels outside the mask) holds exactly despite float32 wire precision.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass

import httpx
import numpy as np

from .errors import DimensionError, ProtocolError, TransportError
from .volume import EditMask, LatentVolume, masked_select, volume_from_bytes, volume_to_bytes

DEFAULT_TIMEOUT = 30.0


@dataclass(frozen=True)
class InpaintResult:
    volume: LatentVolume
    fully_masked_frames: tuple[int, ...]


def _fill_plane(plane: np.ndarray, hole: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Jacobi relaxation of one (channels, h, w) stack sharing a hole mask."""
    u = plane.copy()
    boundary_vals = plane[:, ~hole]
    u[:, hole] = boundary_vals.mean() if boundary_vals.size else 0.0
    _, h, w = u.shape

    def neighbor_sum(x):
        s = np.zeros_like(x)
        s[:, 1:, :] += x[:, :-1, :]
        s[:, :-1, :] += x[:, 1:, :]
        s[:, :, 1:] += x[:, :, :-1]
        s[:, :, :-1] += x[:, :, 1:]
        return s

    ones = np.ones((1, h, w))
    counts = neighbor_sum(ones)[0]

    for _ in range(max_iter):
        avg = neighbor_sum(u) / counts
        new_vals = avg[:, hole]
        delta = np.abs(new_vals - u[:, hole]).max() if new_vals.size else 0.0
        u[:, hole] = new_vals
        scale = np.abs(u).max()
        if delta <= tol * (scale + 1e-30):
            break
    return u


def naive_inpaint(volume: LatentVolume, mask: EditMask, tol: float = 1e-6, max_iter: int = 50_000) -> InpaintResult:
    """Harmonic fill of the masked region; unmasked pixels pass through untouched.

    A frame that is masked everywhere has no boundary data and is filled with
    the per-channel mean of the unmasked pixels across the whole volume (or of
    all values when nothing is unmasked); such frames are flagged in the result.
    """
    if not mask.matches(volume):
        raise DimensionError(f"mask shape {mask.shape} does not match volume shape {volume.shape}")
    out = volume.data.copy()
    holes = mask.data == 1.0
    unmasked_any = (~holes).any()
    fully_masked = []
    for fr in range(volume.frames):
        hole = holes[fr]
        if not hole.any():
            continue
        if hole.all():
            fully_masked.append(fr)
            for ch in range(volume.channels):
                if unmasked_any:
                    fill = volume.data[:, ch, :, :][~holes].mean()
                else:
                    fill = volume.data[:, ch, :, :].mean()
                out[fr, ch] = fill
            continue
        out[fr] = _fill_plane(volume.data[fr], hole, tol, max_iter)
    return InpaintResult(LatentVolume(out), tuple(fully_masked))


def external_inpaint(volume: LatentVolume, mask: EditMask, url: str, client: httpx.Client | None = None) -> LatentVolume:
    """Delegate the fill to POST {url} and splice the masked region back in."""
    payload = {
        "latent": base64.b64encode(volume_to_bytes(volume)).decode("ascii"),
        "mask": base64.b64encode(volume_to_bytes(mask)).decode("ascii"),
    }
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=DEFAULT_TIMEOUT)
    try:
        response = None
        for attempt in (0, 1):
            try:
                response = client.post(url, json=payload)
                break
            except httpx.HTTPError as exc:
                if attempt == 1:
                    raise TransportError(f"inpaint endpoint unreachable: {url} ({exc})") from exc
        if response.status_code != 200:
            raise ProtocolError(f"inpaint endpoint {url} answered {response.status_code}")
        filled = volume_from_bytes(response.content, source=url)
    finally:
        if own_client:
            client.close()
    if not isinstance(filled, LatentVolume):
        raise ProtocolError(f"inpaint endpoint {url} returned a non-latent container")
    if filled.shape != volume.shape:
        raise ProtocolError(f"inpaint endpoint {url} changed shape: {filled.shape} vs {volume.shape}")
    return masked_select(mask, filled, volume)
