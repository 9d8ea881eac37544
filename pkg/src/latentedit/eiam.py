"""Instruction-analysis service clients: captioning, target-prompt reasoning,
and segmentation over HTTP, plus the deterministic prompt embedding that
bridges text to the denoiser's conditioning contract.

Endpoints resolve from explicit arguments or the environment variables
EIAM_CAPTION_URL, EIAM_REASON_URL, EIAM_SEGMENT_URL. Clients are stateless,
time out after 30 s, and retry once on transport failures. Real captioner,
reasoner, and segmentation models plug in by URL; the bundled mock server
(mock_eiam) implements the same wire contracts deterministically.
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass

import httpx
import numpy as np

from .denoise import ConditioningVector
from .errors import (
    AnalysisError,
    ConfigError,
    ProtocolError,
    SegmentationError,
    TransportError,
)
from .volume import EditMask, volume_from_bytes

CAPTION_URL_ENV = "EIAM_CAPTION_URL"
REASON_URL_ENV = "EIAM_REASON_URL"
SEGMENT_URL_ENV = "EIAM_SEGMENT_URL"

DEFAULT_TIMEOUT = 30.0
DEFAULT_CONDITION_LENGTH = 8

TASK_KINDS = ("removal", "replacement", "attribute")

_KIND_VERBS = {
    "replacement": ("replace", "swap"),
    "removal": ("remove", "delete", "erase"),
    "attribute": ("make", "turn", "paint", "color"),
}


def classify_instruction(text: str) -> str:
    head = text.strip().split(maxsplit=1)
    if not head:
        raise AnalysisError("empty instruction")
    verb = head[0].lower()
    for kind, verbs in _KIND_VERBS.items():
        if verb in verbs:
            return kind
    raise AnalysisError(f"cannot classify instruction starting with {verb!r}")


@dataclass(frozen=True)
class Instruction:
    text: str
    kind: str

    @classmethod
    def parse(cls, text: str) -> "Instruction":
        return cls(text.strip(), classify_instruction(text))


@dataclass(frozen=True)
class PromptPair:
    source: str
    target: str
    objects: tuple[str, ...]


def embed_prompt(text: str, length: int = DEFAULT_CONDITION_LENGTH) -> ConditioningVector:
    """Hash-based bag-of-tokens embedding; identical text gives identical vectors."""
    if length < 1:
        raise ConfigError(f"condition length must be >= 1, got {length}")
    vec = np.zeros(length, dtype=np.float64)
    for token in re.findall(r"[a-z0-9']+", text.lower()):
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        vec[int.from_bytes(digest[:8], "little") % length] += 1.0
    return ConditioningVector(vec)


def _resolve_url(url: str | None, env_name: str) -> str:
    url = url or os.environ.get(env_name)
    if not url:
        raise ConfigError(f"no endpoint configured: pass url or set {env_name}")
    return url


def _post(url: str, payload: dict, client: httpx.Client | None) -> httpx.Response:
    own = client is None
    if own:
        client = httpx.Client(timeout=DEFAULT_TIMEOUT)
    try:
        for attempt in (0, 1):
            try:
                return client.post(url, json=payload)
            except httpx.HTTPError as exc:
                if attempt == 1:
                    raise TransportError(f"endpoint unreachable: {url} ({exc})") from exc
    finally:
        if own:
            client.close()


def _json_body(response: httpx.Response, url: str) -> dict:
    try:
        body = response.json()
    except ValueError as exc:
        raise ProtocolError(f"{url}: response is not JSON") from exc
    if not isinstance(body, dict):
        raise ProtocolError(f"{url}: unexpected response {body!r}")
    return body


def describe_source(video_ref: str, url: str | None = None, client: httpx.Client | None = None) -> str:
    """Caption the source video: POST /caption {video_ref} -> {prompt}."""
    url = _resolve_url(url, CAPTION_URL_ENV)
    response = _post(url, {"video_ref": str(video_ref)}, client)
    if response.status_code != 200:
        raise ProtocolError(f"{url}: caption backend answered {response.status_code}: {response.text[:200]}")
    prompt = _json_body(response, url).get("prompt")
    if not isinstance(prompt, str) or not prompt.strip():
        raise ProtocolError(f"{url}: caption backend returned no prompt")
    return prompt


def derive_target(source_prompt: str, instruction: str, url: str | None = None, client: httpx.Client | None = None) -> PromptPair:
    """Reason the edited state: POST /reason {source_prompt, instruction}
    -> {target_prompt, objects}."""
    if not instruction.strip():
        raise AnalysisError("empty instruction")
    url = _resolve_url(url, REASON_URL_ENV)
    response = _post(url, {"source_prompt": source_prompt, "instruction": instruction}, client)
    if response.status_code in (400, 422):
        raise AnalysisError(f"{url}: {response.text[:200]}")
    if response.status_code != 200:
        raise ProtocolError(f"{url}: reason backend answered {response.status_code}: {response.text[:200]}")
    body = _json_body(response, url)
    target = body.get("target_prompt")
    objects = body.get("objects")
    if not isinstance(target, str) or not isinstance(objects, list):
        raise ProtocolError(f"{url}: malformed reason response {body!r}")
    if not objects or not all(isinstance(o, str) and o for o in objects):
        raise AnalysisError("reason backend extracted no objects")
    return PromptPair(source_prompt, target, tuple(objects))


def segment_objects(video_ref: str, objects, url: str | None = None, client: httpx.Client | None = None) -> EditMask:
    """Fetch the edit mask: POST /segment {video_ref, objects} -> mask container."""
    url = _resolve_url(url, SEGMENT_URL_ENV)
    response = _post(url, {"video_ref": str(video_ref), "objects": list(objects)}, client)
    if response.status_code == 404:
        raise SegmentationError(f"{url}: {response.text[:200]}")
    if response.status_code != 200:
        raise ProtocolError(f"{url}: segment backend answered {response.status_code}: {response.text[:200]}")
    mask = volume_from_bytes(response.content, source=url)
    if not isinstance(mask, EditMask):
        raise SegmentationError(f"{url}: segment backend returned a non-mask container")
    return mask
