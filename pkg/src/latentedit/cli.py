"""Command-line client for the editing engine.

Commands build the same request models the HTTP service accepts and either
call the service handlers in process (default) or POST them to a running
engine given --server / LATENTEDIT_SERVER. File reading and writing stays
on the client side.

Exit codes: 0 ok, 2 config error, 3 I/O or file-format error, 4 service
error, 5 numerical error.
"""

from __future__ import annotations

import base64
import functools
import sys
from pathlib import Path

import click
import httpx

from .errors import ConfigError, FormatError, LatentEditError, ProtocolError, TransportError
from .service.models import (
    CoeffRequest,
    DistRequest,
    EditRequest,
    InspectRequest,
    InvertRequest,
    PreviewRequest,
    WorldSpec,
)

SERVER_ENV = "LATENTEDIT_SERVER"
_REMOTE_TIMEOUT = 600.0


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc})") from exc


def _write_bytes(path, blob: bytes) -> None:
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise FormatError(f"{path}: cannot write ({exc})") from exc


def _b64_of(path) -> str:
    return base64.b64encode(_read_bytes(path)).decode("ascii")


def _dispatch(server: str | None, path: str, request):
    from .service.app import HANDLERS

    handler, _, response_cls = HANDLERS[path]
    if not server:
        return handler(request)
    url = server.rstrip("/") + path
    try:
        response = httpx.post(url, json=request.model_dump(), timeout=_REMOTE_TIMEOUT)
    except httpx.HTTPError as exc:
        raise TransportError(f"engine unreachable: {url} ({exc})") from exc
    if response.status_code != 200:
        try:
            body = response.json()
        except ValueError:
            raise ProtocolError(f"{url}: HTTP {response.status_code}") from None
        detail = body.get("detail", body)
        exit_code = body.get("exit_code")
        exc = ProtocolError(f"{url}: {detail}")
        if isinstance(exit_code, int):
            exc.exit_code = exit_code
        raise exc
    return response_cls.model_validate(response.json())


def _world_spec(manifest_path, sigma: float) -> WorldSpec:
    manifest = Path(manifest_path)
    means: dict[str, str] = {}
    for lineno, raw in enumerate(manifest.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(maxsplit=1)
        if len(parts) != 2 or not parts[0].lstrip("-").isdigit():
            raise FormatError(f"{manifest}:{lineno}: expected 'condition_id path', got {raw!r}")
        if parts[0] in means:
            raise FormatError(f"{manifest}:{lineno}: duplicate condition id {parts[0]}")
        means[parts[0]] = _b64_of((manifest.parent / parts[1]).resolve())
    return WorldSpec(sigma=sigma, means=means)


def _engine_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except LatentEditError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _server_option(fn):
    return click.option("--server", envvar=SERVER_ENV, default=None,
                        help="engine service URL; default runs in process")(fn)


def _world_options(fn):
    fn = click.option("--world", "world_path", default=None,
                      help="GaussianWorld manifest: lines 'condition_id path'")(fn)
    fn = click.option("--sigma", default=1.0, show_default=True, help="world data stddev")(fn)
    fn = click.option("--denoiser", default="analytic", show_default=True,
                      type=click.Choice(["analytic", "zero"]))(fn)
    return fn


def _config_options(fn):
    fn = click.option("--config", "config_path", default=None, help="key = value config file")(fn)
    fn = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                      help="override one config key (repeatable)")(fn)
    return fn


def _collect_config(config_path, overrides) -> tuple[str, dict[str, str]]:
    text = Path(config_path).read_text() if config_path else ""
    parsed: dict[str, str] = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        parsed[key.strip()] = value.strip()
    return text, parsed


@click.group()
@click.version_option()
def main():
    """Noise-latent video editing engine."""


@main.command("edit")
@click.option("--in", "in_path", required=True, help="source latent container")
@click.option("--mask", "mask_path", default=None, help="edit mask container")
@click.option("--instruction", default=None, help="edit instruction for the analysis services")
@click.option("--video-ref", default=None, help="video id for caption/segment lookups (default: --in)")
@click.option("--source-prompt", default=None)
@click.option("--target-prompt", default=None)
@click.option("--window", default=None, metavar="LO:HI", help="explicit guidance window (overrides alpha/beta)")
@click.option("--out", "out_path", required=True, help="edited latent container")
@click.option("--report", "report_path", default=None, help="write the edit report here")
@_config_options
@_world_options
@_server_option
@_engine_errors
def edit_cmd(in_path, mask_path, instruction, video_ref, source_prompt, target_prompt,
             window, out_path, report_path, config_path, overrides, world_path, sigma,
             denoiser, server):
    """Run one edit job (manual mask/prompts, or instruction-driven)."""
    config_text, parsed = _collect_config(config_path, overrides)
    if window is not None:
        parsed["window"] = window
    if instruction is not None and video_ref is None:
        video_ref = in_path
    request = EditRequest(
        source=_b64_of(in_path),
        mask=_b64_of(mask_path) if mask_path else None,
        instruction=instruction,
        video_ref=video_ref,
        source_prompt=source_prompt,
        target_prompt=target_prompt,
        config_text=config_text,
        overrides=parsed,
        world=_world_spec(world_path, sigma) if world_path else None,
        denoiser=denoiser,
    )
    response = _dispatch(server, "/v1/edit", request)
    _write_bytes(out_path, base64.b64decode(response.edited))
    if report_path:
        Path(report_path).write_text(response.report_text)
    metrics = response.metrics
    click.echo(f"edited -> {out_path}")
    click.echo(f"unedited_mse = {metrics.unedited_mse!r}")
    if metrics.edited_mean_shift is not None:
        click.echo(f"edited_mean_shift = {metrics.edited_mean_shift!r}")


@main.command("invert")
@click.option("--in", "in_path", required=True, help="source latent container")
@click.option("--steps", required=True, type=int, help="invert up to this step index")
@click.option("--prompt", default="", help="conditioning text for inversion")
@click.option("--out-trajectory", "out_path", required=True)
@_config_options
@_world_options
@_server_option
@_engine_errors
def invert_cmd(in_path, steps, prompt, out_path, config_path, overrides, world_path,
               sigma, denoiser, server):
    """Build an inversion trajectory and write it as an LTRJ container."""
    config_text, parsed = _collect_config(config_path, overrides)
    request = InvertRequest(
        source=_b64_of(in_path),
        steps=steps,
        prompt=prompt,
        config_text=config_text,
        overrides=parsed,
        world=_world_spec(world_path, sigma) if world_path else None,
        denoiser=denoiser,
    )
    response = _dispatch(server, "/v1/invert", request)
    _write_bytes(out_path, base64.b64decode(response.trajectory))
    click.echo(f"trajectory -> {out_path}")


@main.command("dist")
@click.option("--mask", "mask_path", required=True)
@click.option("--out", "out_path", required=True, help="distance field (kind=0, channels=1)")
@_server_option
@_engine_errors
def dist_cmd(mask_path, out_path, server):
    """Exact Euclidean distance transform of a mask."""
    response = _dispatch(server, "/v1/dist", DistRequest(mask=_b64_of(mask_path)))
    _write_bytes(out_path, base64.b64decode(response.field))
    click.echo(f"distances -> {out_path}")
    if response.empty_frames:
        click.echo(f"empty frames (sentinel -1): {response.empty_frames}")


@main.command("coeff")
@click.option("--mask", "mask_path", required=True)
@click.option("-m", "--transition-width", "m", required=True, type=float)
@click.option("--literal-tail", is_flag=True, help="published far-field branch (D=1 beyond the zone)")
@click.option("--out", "out_path", required=True, help="coefficient field (kind=1)")
@_server_option
@_engine_errors
def coeff_cmd(mask_path, m, literal_tail, out_path, server):
    """Blend-coefficient field D for a mask and transition width."""
    request = CoeffRequest(mask=_b64_of(mask_path), m=m, literal_tail=literal_tail)
    response = _dispatch(server, "/v1/coeff", request)
    _write_bytes(out_path, base64.b64decode(response.field))
    click.echo(f"coefficients -> {out_path}")


@main.command("inspect")
@click.option("--in", "in_path", required=True)
@_server_option
@_engine_errors
def inspect_cmd(in_path, server):
    """Print container header fields and payload statistics."""
    response = _dispatch(server, "/v1/inspect", InspectRequest(volume=_b64_of(in_path)))
    click.echo(f"kind = {response.kind}")
    click.echo(f"frames = {response.frames}")
    click.echo(f"channels = {response.channels}")
    click.echo(f"height = {response.height}")
    click.echo(f"width = {response.width}")
    click.echo(f"min = {response.vmin!r}")
    click.echo(f"max = {response.vmax!r}")
    click.echo(f"mean = {response.mean!r}")
    click.echo(f"std = {response.std!r}")


@main.command("preview")
@click.option("--in", "in_path", required=True)
@click.option("--out-prefix", "prefix", required=True)
@_server_option
@_engine_errors
def preview_cmd(in_path, prefix, server):
    """Emit one grayscale PGM per frame per channel plus normalization bounds."""
    response = _dispatch(server, "/v1/preview", PreviewRequest(volume=_b64_of(in_path)))
    prefix_path = Path(prefix)
    if prefix_path.parent != Path("."):
        prefix_path.parent.mkdir(parents=True, exist_ok=True)
    for item in response.files:
        _write_bytes(prefix_path.parent / f"{prefix_path.name}_{item.name}", base64.b64decode(item.data))
    (prefix_path.parent / f"{prefix_path.name}.bounds.txt").write_text(response.sidecar_text)
    click.echo(f"{len(response.files)} frames -> {prefix}_*.pgm")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@_engine_errors
def serve_cmd(host, port):
    """Run the engine service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


@main.command("serve-mock")
@click.option("--fixtures", "fixtures_dir", required=True, help="fixtures directory")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8600, show_default=True, type=int)
@_engine_errors
def serve_mock_cmd(fixtures_dir, host, port):
    """Run the deterministic mock analysis services."""
    import uvicorn

    from .mock_eiam import create_mock_app

    if not Path(fixtures_dir).is_dir():
        raise ConfigError(f"fixtures directory not found: {fixtures_dir}")
    uvicorn.run(create_mock_app(fixtures_dir), host=host, port=port)


if __name__ == "__main__":
    main()
