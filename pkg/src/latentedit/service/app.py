"""Engine service: HTTP surface over the editing core.

The handler functions hold no logic beyond decoding payloads, composing
core operations, and encoding results; the CLI calls them directly when no
server is configured, so CLI runs and service runs are the same code path.
"""

from __future__ import annotations

import base64
import binascii

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import apply_overrides, parse_config
from ..denoise import AnalyticGaussianDenoiser, GaussianWorld, ZeroDenoiser
from ..eiam import embed_prompt
from ..errors import (
    ConfigError,
    FormatError,
    LatentEditError,
    NumericalError,
    ServiceError,
)
from ..maskops import coefficient_field, distance_transform
from ..pipeline import bounds_sidecar_text, render_previews, run_edit
from ..schedule import NoiseSchedule, invert, trajectory_to_bytes
from ..volume import (
    EditMask,
    KIND_LATENT,
    LatentVolume,
    _parse_header,
    _parse_payload,
    field_from_bytes,
    field_to_bytes,
    volume_from_bytes,
    volume_to_bytes,
)
from .models import (
    CoeffRequest,
    CoeffResponse,
    DistRequest,
    DistResponse,
    EditRequest,
    EditResponse,
    ErrorBody,
    InspectRequest,
    InspectResponse,
    InvertRequest,
    InvertResponse,
    PreviewFile,
    PreviewRequest,
    PreviewResponse,
    ReportMetrics,
    WorldSpec,
)


def _b64_bytes(data: str, what: str) -> bytes:
    try:
        return base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise FormatError(f"{what}: invalid base64 payload") from exc


def _decode_latent(data: str, what: str) -> LatentVolume:
    vol = volume_from_bytes(_b64_bytes(data, what), source=what)
    if not isinstance(vol, LatentVolume):
        raise FormatError(f"{what}: expected a latent container (kind=0)")
    return vol


def _decode_mask(data: str, what: str) -> EditMask:
    vol = volume_from_bytes(_b64_bytes(data, what), source=what)
    if not isinstance(vol, EditMask):
        raise FormatError(f"{what}: expected a mask container (kind=1)")
    return vol


def _encode(blob: bytes) -> str:
    return base64.b64encode(blob).decode("ascii")


def _build_config(config_text: str, overrides: dict[str, str]):
    cfg = parse_config(config_text)
    return apply_overrides(cfg, overrides) if overrides else cfg


def _build_world(spec: WorldSpec | None) -> GaussianWorld | None:
    if spec is None:
        return None
    means = {}
    for key, data in spec.means.items():
        try:
            cid = int(key)
        except ValueError:
            raise ConfigError(f"world condition id {key!r} is not an integer") from None
        means[cid] = _decode_latent(data, f"world mean {key}")
    return GaussianWorld(means, spec.sigma)


def _build_denoiser(kind: str, world: GaussianWorld | None, sched: NoiseSchedule):
    if kind == "zero":
        return ZeroDenoiser()
    if kind == "analytic":
        if world is None:
            raise ConfigError("denoiser=analytic requires a world (condition means)")
        return AnalyticGaussianDenoiser(world, sched)
    raise ConfigError(f"unknown denoiser {kind!r} (expected analytic or zero)")


def handle_edit(req: EditRequest) -> EditResponse:
    cfg = _build_config(req.config_text, req.overrides)
    source = _decode_latent(req.source, "source")
    mask = _decode_mask(req.mask, "mask") if req.mask is not None else None
    world = _build_world(req.world)
    sched = NoiseSchedule.make(cfg.schedule, cfg.total_steps)
    denoiser = _build_denoiser(req.denoiser, world, sched)
    outcome = run_edit(
        source, cfg, denoiser,
        mask=mask,
        instruction=req.instruction,
        video_ref=req.video_ref,
        source_prompt=req.source_prompt,
        target_prompt=req.target_prompt,
        world=world,
    )
    report = outcome.report
    return EditResponse(
        edited=_encode(volume_to_bytes(outcome.edited)),
        report_text=report.to_text(),
        metrics=ReportMetrics(
            unedited_mse=report.unedited_mse,
            unedited_rel_l2=report.unedited_rel_l2,
            unedited_pixels=report.unedited_pixels,
            edited_mean=report.edited_mean,
            edited_pixels=report.edited_pixels,
            edited_mean_shift=report.edited_mean_shift,
        ),
        source_prompt=outcome.source_prompt,
        target_prompt=outcome.target_prompt,
    )


def handle_invert(req: InvertRequest) -> InvertResponse:
    cfg = _build_config(req.config_text, req.overrides)
    source = _decode_latent(req.source, "source")
    world = _build_world(req.world)
    sched = NoiseSchedule.make(cfg.schedule, cfg.total_steps)
    denoiser = _build_denoiser(req.denoiser, world, sched)
    cond = embed_prompt(req.prompt, cfg.condition_length)
    trajectory = invert(source, req.steps, denoiser, cond, cfg.sampler, sched)
    return InvertResponse(trajectory=_encode(trajectory_to_bytes(trajectory)))


def handle_dist(req: DistRequest) -> DistResponse:
    mask = _decode_mask(req.mask, "mask")
    field = distance_transform(mask)
    finite = np.where(np.isfinite(field.distances), field.distances, -1.0)
    volume = LatentVolume(finite[:, None, :, :])
    empty = [i for i, flag in enumerate(field.empty_frames) if flag]
    return DistResponse(field=_encode(volume_to_bytes(volume)), empty_frames=empty)


def handle_coeff(req: CoeffRequest) -> CoeffResponse:
    mask = _decode_mask(req.mask, "mask")
    coeff = coefficient_field(distance_transform(mask), req.m, literal_tail=req.literal_tail)
    return CoeffResponse(field=_encode(field_to_bytes(coeff.values)))


def handle_inspect(req: InspectRequest) -> InspectResponse:
    blob = _b64_bytes(req.volume, "volume")
    kind, dims = _parse_header(blob, "volume")
    values = _parse_payload(blob, dims, "volume")
    return InspectResponse(
        kind="latent" if kind == KIND_LATENT else "mask",
        frames=dims[0], channels=dims[1], height=dims[2], width=dims[3],
        vmin=float(values.min()), vmax=float(values.max()),
        mean=float(values.mean()), std=float(values.std()),
    )


def handle_preview(req: PreviewRequest) -> PreviewResponse:
    blob = _b64_bytes(req.volume, "volume")
    kind, _ = _parse_header(blob, "volume")
    if kind == KIND_LATENT:
        volume = volume_from_bytes(blob, source="volume")
    else:
        # render the stored values, not the binarized mask view
        volume = LatentVolume(field_from_bytes(blob, source="volume")[:, None, :, :])
    files, vmin, vmax = render_previews(volume)
    return PreviewResponse(
        files=[PreviewFile(name=name, data=_encode(blob)) for name, blob in files],
        vmin=vmin, vmax=vmax,
        sidecar_text=bounds_sidecar_text(vmin, vmax),
    )


HANDLERS = {
    "/v1/edit": (handle_edit, EditRequest, EditResponse),
    "/v1/invert": (handle_invert, InvertRequest, InvertResponse),
    "/v1/dist": (handle_dist, DistRequest, DistResponse),
    "/v1/coeff": (handle_coeff, CoeffRequest, CoeffResponse),
    "/v1/inspect": (handle_inspect, InspectRequest, InspectResponse),
    "/v1/preview": (handle_preview, PreviewRequest, PreviewResponse),
}


def _http_status(exc: LatentEditError) -> int:
    if isinstance(exc, ConfigError):
        return 400
    if isinstance(exc, FormatError):
        return 422
    if isinstance(exc, ServiceError):
        return 502
    if isinstance(exc, NumericalError):
        return 500
    return 500


def create_app() -> FastAPI:
    app = FastAPI(title="latentedit", version=__version__)

    @app.exception_handler(LatentEditError)
    def _on_engine_error(request, exc: LatentEditError):
        body = ErrorBody(error=type(exc).__name__, exit_code=exc.exit_code, detail=str(exc))
        return JSONResponse(status_code=_http_status(exc), content=body.model_dump())

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__}

    for path, (handler, request_cls, response_cls) in HANDLERS.items():
        app.post(path, response_model=response_cls)(handler)

    return app


app = create_app()
