"""Request/response schemas for the engine service.

Binary payloads (latent containers, masks, trajectories) travel as base64
strings of the same container bytes the CLI writes to disk, so a remote
run and a local run see byte-identical inputs.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class WorldSpec(BaseModel):
    sigma: float = 1.0
    means: dict[str, str] = Field(default_factory=dict)  # condition id -> base64 latent


class ReportMetrics(BaseModel):
    unedited_mse: float
    unedited_rel_l2: float
    unedited_pixels: int
    edited_mean: float
    edited_pixels: int
    edited_mean_shift: float | None = None


class EditRequest(BaseModel):
    source: str
    mask: str | None = None
    instruction: str | None = None
    video_ref: str | None = None
    source_prompt: str | None = None
    target_prompt: str | None = None
    config_text: str = ""
    overrides: dict[str, str] = Field(default_factory=dict)
    world: WorldSpec | None = None
    denoiser: str = "analytic"


class EditResponse(BaseModel):
    edited: str
    report_text: str
    metrics: ReportMetrics
    source_prompt: str | None = None
    target_prompt: str | None = None


class InvertRequest(BaseModel):
    source: str
    steps: int
    prompt: str = ""
    config_text: str = ""
    overrides: dict[str, str] = Field(default_factory=dict)
    world: WorldSpec | None = None
    denoiser: str = "analytic"


class InvertResponse(BaseModel):
    trajectory: str


class DistRequest(BaseModel):
    mask: str


class DistResponse(BaseModel):
    field: str  # kind=0, channels=1 container; empty frames hold the -1 sentinel
    empty_frames: list[int] = Field(default_factory=list)


class CoeffRequest(BaseModel):
    mask: str
    m: float
    literal_tail: bool = False


class CoeffResponse(BaseModel):
    field: str  # kind=1 container


class InspectRequest(BaseModel):
    volume: str


class InspectResponse(BaseModel):
    kind: str
    frames: int
    channels: int
    height: int
    width: int
    vmin: float
    vmax: float
    mean: float
    std: float


class PreviewFile(BaseModel):
    name: str
    data: str


class PreviewRequest(BaseModel):
    volume: str


class PreviewResponse(BaseModel):
    files: list[PreviewFile]
    vmin: float
    vmax: float
    sidecar_text: str


class ErrorBody(BaseModel):
    error: str
    exit_code: int
    detail: str
