"""End-to-end edit orchestration, desk-scale metrics, and previews.

An edit job runs: instruction analysis (or a manual prompt/mask bypass),
DDIM inversion, two-branch structural initialization, guided denoising,
then a report. Everything downstream of the prompts is a pure function of
(source, mask, config, denoiser), and the only random draw is seeded, so
identical inputs give bit-identical outputs.

The report's metrics are desk-scale stand-ins for perceptual ones: the
mean-squared deviation from the source outside the dilated mask measures
unedited-region preservation, and the edited-region mean shift toward the
target condition mean measures instruction following.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .config import EditConfig, config_to_text
from .denoise import ConditioningVector, Denoiser, GaussianWorld
from .eiam import describe_source, derive_target, embed_prompt, segment_objects
from .errors import ConfigError, DimensionError, LatentEditError
from .maskops import dilate
from .ngm import guided_denoise
from .schedule import InversionTrajectory, NoiseSchedule
from .snis import prepare_branches, structural_init
from .volume import EditMask, LatentVolume


@dataclass
class EditReport:
    unedited_mse: float
    unedited_rel_l2: float
    unedited_pixels: int
    edited_mean: float
    edited_pixels: int
    edited_mean_shift: float | None
    stage_seconds: dict[str, float]
    config_text: str

    def to_text(self) -> str:
        lines = ["[metrics]"]
        lines.append(f"unedited_mse = {self.unedited_mse!r}")
        lines.append(f"unedited_rel_l2 = {self.unedited_rel_l2!r}")
        lines.append(f"unedited_pixels = {self.unedited_pixels}")
        lines.append(f"edited_mean = {self.edited_mean!r}")
        lines.append(f"edited_pixels = {self.edited_pixels}")
        if self.edited_mean_shift is not None:
            lines.append(f"edited_mean_shift = {self.edited_mean_shift!r}")
        lines.append("")
        lines.append("[config]")
        lines.extend(self.config_text.rstrip("\n").splitlines())
        lines.append("")
        lines.append("[timings]")
        for stage, seconds in self.stage_seconds.items():
            lines.append(f"time.{stage} = {seconds:.6f}")
        return "\n".join(lines) + "\n"


def strip_timings(report_text: str) -> str:
    """Drop the wall-time section; everything else is deterministic."""
    kept = []
    for line in report_text.splitlines():
        if line.startswith("[timings]") or line.startswith("time."):
            continue
        kept.append(line)
    return "\n".join(kept) + "\n"


@contextmanager
def _stage(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except LatentEditError as exc:
        raise type(exc)(f"[stage {name}] {exc}") from exc
    finally:
        timings[name] = time.perf_counter() - start


@dataclass
class EditOutcome:
    edited: LatentVolume
    report: EditReport
    trajectory: InversionTrajectory
    source_prompt: str | None
    target_prompt: str | None
    mask: EditMask


def run_edit(
    source: LatentVolume,
    cfg: EditConfig,
    denoiser: Denoiser,
    *,
    mask: EditMask | None = None,
    instruction: str | None = None,
    video_ref: str | None = None,
    source_prompt: str | None = None,
    target_prompt: str | None = None,
    world: GaussianWorld | None = None,
    caption_url: str | None = None,
    reason_url: str | None = None,
    segment_url: str | None = None,
    http_client=None,
) -> EditOutcome:
    """Run one edit job.

    Manual bypass: pass `mask` and `target_prompt` directly. Instruction
    mode: pass `instruction` (and `video_ref` for caption/segment lookups);
    missing pieces are fetched from the analysis services.
    """
    timings: dict[str, float] = {}

    with _stage("analyze", timings):
        if instruction is not None:
            if source_prompt is None:
                if video_ref is None:
                    raise ConfigError("instruction mode needs video_ref or source_prompt")
                source_prompt = describe_source(video_ref, url=caption_url, client=http_client)
            pair = derive_target(source_prompt, instruction, url=reason_url, client=http_client)
            target_prompt = pair.target
            if mask is None:
                if video_ref is None:
                    raise ConfigError("instruction mode needs video_ref or an explicit mask")
                mask = segment_objects(video_ref, pair.objects, url=segment_url, client=http_client)
        if target_prompt is None:
            raise ConfigError("no target prompt: pass target_prompt or instruction")
        if mask is None:
            raise ConfigError("no edit mask: pass mask or instruction")
        if not mask.matches(source):
            raise DimensionError(f"mask shape {mask.shape} does not match source shape {source.shape}")

    cond_target = embed_prompt(target_prompt, cfg.condition_length)
    cond_source = embed_prompt(source_prompt, cfg.condition_length) if source_prompt else None
    sched = NoiseSchedule.make(cfg.schedule, cfg.total_steps)
    window = cfg.guidance_window()
    if window is None:
        invert_up_to = cfg.resolved_t_start
    elif isinstance(cfg.window, tuple):
        invert_up_to = window.hi
    else:
        invert_up_to = math.ceil(cfg.beta * cfg.total_steps)

    with _stage("invert", timings):
        branches = prepare_branches(
            source, mask, cfg.snis_config(), denoiser, cond_target, sched, cfg.sampler,
            invert_up_to=min(invert_up_to, cfg.total_steps),
        )

    with _stage("blend", timings):
        z_hat = structural_init(
            branches.z_star_t, branches.z_t, mask, cfg.transition_width,
            literal_tail=cfg.literal_coefficient_tail,
        )

    with _stage("guide", timings):
        edited = guided_denoise(
            z_hat, cfg.resolved_t_start, branches.trajectory, mask, window,
            denoiser, cond_target, sched, cfg.sampler, alignment=cfg.ngm_alignment,
        )

    with _stage("report", timings):
        report = compute_report(
            source, edited, branches.trajectory, mask, world,
            transition_width=cfg.transition_width,
            cond_source=cond_source, cond_target=cond_target,
            config_text=config_to_text(cfg), stage_seconds=timings,
        )

    return EditOutcome(edited, report, branches.trajectory, source_prompt, target_prompt, mask)


def compute_report(
    source: LatentVolume,
    edited: LatentVolume,
    trajectory: InversionTrajectory | None,
    mask: EditMask,
    world: GaussianWorld | None = None,
    *,
    transition_width: float,
    cond_source: ConditioningVector | None = None,
    cond_target: ConditioningVector | None = None,
    config_text: str = "",
    stage_seconds: dict[str, float] | None = None,
) -> EditReport:
    """Desk-scale metrics: unedited-region deviation is measured outside the
    transition-width dilation of the mask, against the trajectory's clean
    entry (the reconstruction target) when a trajectory is given."""
    reference = trajectory.entry(0) if trajectory is not None else source
    if edited.shape != reference.shape:
        raise DimensionError(f"edited shape {edited.shape} does not match source shape {reference.shape}")

    outside = dilate(mask, transition_width).data == 0.0
    outside4 = np.broadcast_to(outside[:, None, :, :], edited.shape)
    unedited_pixels = int(outside.sum())
    if unedited_pixels:
        diff = edited.data[outside4] - reference.data[outside4]
        unedited_mse = float(np.mean(diff ** 2))
        norm = float(np.linalg.norm(reference.data[outside4]))
        unedited_rel_l2 = float(np.linalg.norm(diff) / norm) if norm > 0 else 0.0
    else:
        unedited_mse = 0.0
        unedited_rel_l2 = 0.0

    edited_region = np.broadcast_to((mask.data == 1.0)[:, None, :, :], edited.shape)
    edited_pixels = int(mask.data.sum())
    edited_mean = float(edited.data[edited_region].mean()) if edited_pixels else 0.0

    shift = None
    if world is not None and cond_source is not None and cond_target is not None and edited_pixels:
        try:
            mu_s = world.mean(cond_source.condition_id)
            mu_t = world.mean(cond_target.condition_id)
        except LatentEditError:
            mu_s = mu_t = None
        if mu_t is not None:
            target_mean = float(mu_t.data[edited_region].mean())
            source_mean = float(mu_s.data[edited_region].mean())
            separation = abs(source_mean - target_mean)
            if separation > 0:
                shift = abs(edited_mean - target_mean) / separation

    return EditReport(
        unedited_mse=unedited_mse,
        unedited_rel_l2=unedited_rel_l2,
        unedited_pixels=unedited_pixels,
        edited_mean=edited_mean,
        edited_pixels=edited_pixels,
        edited_mean_shift=shift,
        stage_seconds=dict(stage_seconds or {}),
        config_text=config_text,
    )


# --- previews ---------------------------------------------------------------


def render_previews(volume: LatentVolume) -> tuple[list[tuple[str, bytes]], float, float]:
    """One 8-bit grayscale PGM per frame per channel, min-max normalized over
    the whole volume; a degenerate range maps everything to mid-gray 128."""
    vmin = float(volume.data.min())
    vmax = float(volume.data.max())
    files = []
    for frame in range(volume.frames):
        for channel in range(volume.channels):
            plane = volume.data[frame, channel]
            if vmax > vmin:
                quantized = np.rint((plane - vmin) / (vmax - vmin) * 255.0).astype(np.uint8)
            else:
                quantized = np.full(plane.shape, 128, dtype=np.uint8)
            header = f"P5\n{volume.width} {volume.height}\n255\n".encode("ascii")
            files.append((f"f{frame:03d}_c{channel:02d}.pgm", header + quantized.tobytes()))
    return files, vmin, vmax


def bounds_sidecar_text(vmin: float, vmax: float) -> str:
    return f"min = {vmin!r}\nmax = {vmax!r}\n"


def emit_preview(volume: LatentVolume, path_prefix) -> list:
    """Write the PGM frames plus a sidecar recording the normalization bounds."""
    from pathlib import Path

    prefix = Path(path_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    files, vmin, vmax = render_previews(volume)
    written = []
    for name, blob in files:
        path = prefix.parent / f"{prefix.name}_{name}"
        path.write_bytes(blob)
        written.append(path)
    sidecar = prefix.parent / f"{prefix.name}.bounds.txt"
    sidecar.write_text(bounds_sidecar_text(vmin, vmax))
    written.append(sidecar)
    return written
