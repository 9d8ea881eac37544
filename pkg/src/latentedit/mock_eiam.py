"""Deterministic mock backends for the instruction-analysis services.

Every response is a pure function of the request and the fixtures
directory:

    fixtures/
      captions.txt            tab-separated "video_id<TAB>caption" lines
      masks/<id>__<object>.latf   mask containers, object names slugified

Captions are keyed by the video reference's stem, so both bare fixture ids
and paths to latent containers resolve. Reasoning applies fixed template
rules per task kind (replacement rewrites the object phrase with a
vowel-aware article, removal drops it, attribute prepends the attribute);
segmentation returns the fixture mask, unioning masks when several objects
are named. An /inpaint endpoint backed by the harmonic fill is also served
so the external inpainting hook can be exercised end to end.
"""

from __future__ import annotations

import base64
import re
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .eiam import classify_instruction
from .errors import AnalysisError, LatentEditError
from .inpaint import naive_inpaint
from .volume import EditMask, LatentVolume, read_volume, volume_from_bytes, volume_to_bytes

_REPLACE_RE = re.compile(
    r"^(?:replace|swap)\s+(?:(?:the|a|an)\s+)?(?P<obj>.+?)\s+with\s+(?:(?:the|a|an)\s+)?(?P<new>.+?)\s*$",
    re.IGNORECASE,
)
_REMOVE_RE = re.compile(
    r"^(?:remove|delete|erase)\s+(?:(?:the|a|an)\s+)?(?P<obj>.+?)\s*$",
    re.IGNORECASE,
)
_ATTR_RE = re.compile(
    r"^(?:make|turn|paint|color)\s+(?:(?:the|a|an)\s+)?(?P<obj>.+?)\s+(?P<attr>\w+)\s*$",
    re.IGNORECASE,
)
_AND_SPLIT = re.compile(r"\s+and\s+(?:(?:the|a|an)\s+)?", re.IGNORECASE)


def _article_for(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


def _object_phrase(obj: str) -> re.Pattern:
    return re.compile(rf"(?:\b(a|an|the)\s+)?\b{re.escape(obj)}\b", re.IGNORECASE)


def substitute_object(source: str, obj: str, new: str) -> str:
    def repl(match: re.Match) -> str:
        article = match.group(1)
        if article is None:
            return new
        if article.lower() == "the":
            return f"the {new}"
        return f"{_article_for(new)} {new}"

    return _object_phrase(obj).sub(repl, source)


def remove_object(source: str, obj: str) -> str:
    stripped = _object_phrase(obj).sub("", source)
    return re.sub(r"\s+", " ", stripped).strip()


def reason_target(source_prompt: str, instruction: str) -> tuple[str, list[str]]:
    """Template reasoning: derive the target prompt and the object names."""
    kind = classify_instruction(instruction)
    text = instruction.strip()
    if kind == "replacement":
        match = _REPLACE_RE.match(text)
        if not match:
            raise AnalysisError(f"cannot parse replacement instruction {text!r}")
        obj, new = match.group("obj"), match.group("new")
        return substitute_object(source_prompt, obj, new), _split_objects(obj)
    if kind == "removal":
        match = _REMOVE_RE.match(text)
        if not match:
            raise AnalysisError(f"cannot parse removal instruction {text!r}")
        obj = match.group("obj")
        target = source_prompt
        for name in _split_objects(obj):
            target = remove_object(target, name)
        return target, _split_objects(obj)
    match = _ATTR_RE.match(text)
    if not match:
        raise AnalysisError(f"cannot parse attribute instruction {text!r}")
    obj, attr = match.group("obj"), match.group("attr")
    return substitute_object(source_prompt, obj, f"{attr} {obj}"), _split_objects(obj)


def _split_objects(phrase: str) -> list[str]:
    objects = [part.strip() for part in _AND_SPLIT.split(phrase) if part.strip()]
    if not objects:
        raise AnalysisError("no objects named in instruction")
    return objects


def object_slug(name: str) -> str:
    return re.sub(r"\s+", "-", name.strip().lower())


class Fixtures:
    def __init__(self, root):
        self.root = Path(root)
        self.captions: dict[str, str] = {}
        captions_file = self.root / "captions.txt"
        if captions_file.exists():
            for line in captions_file.read_text().splitlines():
                if not line.strip() or line.startswith("#"):
                    continue
                key, _, caption = line.partition("\t")
                self.captions[key.strip()] = caption.strip()

    def caption_for(self, video_ref: str) -> str | None:
        if video_ref in self.captions:
            return self.captions[video_ref]
        return self.captions.get(Path(video_ref).stem)

    def mask_path(self, video_ref: str, obj: str) -> Path:
        key = video_ref if video_ref in self.captions else Path(video_ref).stem
        return self.root / "masks" / f"{key}__{object_slug(obj)}.latf"


class CaptionRequest(BaseModel):
    video_ref: str


class ReasonRequest(BaseModel):
    source_prompt: str
    instruction: str


class SegmentRequest(BaseModel):
    video_ref: str
    objects: list[str]


class InpaintRequest(BaseModel):
    latent: str
    mask: str


def create_mock_app(fixtures_dir) -> FastAPI:
    fixtures = Fixtures(fixtures_dir)
    app = FastAPI(title="eiam-mock")

    @app.exception_handler(LatentEditError)
    def _on_error(request, exc: LatentEditError):
        status = 400 if isinstance(exc, AnalysisError) else 422
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.post("/caption")
    def caption(req: CaptionRequest):
        prompt = fixtures.caption_for(req.video_ref)
        if prompt is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown video_ref {req.video_ref!r}"})
        return {"prompt": prompt}

    @app.post("/reason")
    def reason(req: ReasonRequest):
        target, objects = reason_target(req.source_prompt, req.instruction)
        return {"target_prompt": target, "objects": objects}

    @app.post("/segment")
    def segment(req: SegmentRequest):
        if not req.objects:
            return JSONResponse(status_code=404, content={"detail": "no objects requested"})
        union = None
        for obj in req.objects:
            path = fixtures.mask_path(req.video_ref, obj)
            if not path.exists():
                return JSONResponse(
                    status_code=404,
                    content={"detail": f"no mask fixture for ({req.video_ref!r}, {obj!r})"},
                )
            mask = read_volume(path)
            if not isinstance(mask, EditMask):
                return JSONResponse(status_code=422, content={"detail": f"{path} is not a mask container"})
            union = mask.data if union is None else ((union + mask.data) > 0).astype(float)
        return Response(content=volume_to_bytes(EditMask(union)), media_type="application/octet-stream")

    @app.post("/inpaint")
    def inpaint(req: InpaintRequest):
        latent = volume_from_bytes(base64.b64decode(req.latent), source="inpaint.latent")
        mask = volume_from_bytes(base64.b64decode(req.mask), source="inpaint.mask")
        if not isinstance(latent, LatentVolume) or not isinstance(mask, EditMask):
            return JSONResponse(status_code=422, content={"detail": "expected a latent and a mask container"})
        filled = naive_inpaint(latent, mask).volume
        return Response(content=volume_to_bytes(filled), media_type="application/octet-stream")

    return app
