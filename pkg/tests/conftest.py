import threading
import time
from pathlib import Path

import numpy as np
import pytest
import uvicorn
from fastapi.testclient import TestClient

from latentedit import EditMask, LatentVolume, write_volume
from latentedit.mock_eiam import create_mock_app
from latentedit.rng import gaussian

FIXTURES = Path(__file__).parent / "fixtures" / "eiam"

# fixture vocabulary; prompts chosen so the two argmax condition ids differ
SOURCE_PROMPT = "an elephant walks past another elephant"
TARGET_PROMPT = "a zebra walks past another zebra"
INSTRUCTION = "replace the elephant with a zebra"
VIDEO_ID = "elephant-walk"


class ServerThread:
    """uvicorn on an ephemeral localhost port, stopped on context exit."""

    def __init__(self, app):
        self._config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self.server = uvicorn.Server(self._config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)
        self.url = None

    def __enter__(self):
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.02)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        self.url = f"http://127.0.0.1:{port}"
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def mock_app():
    return create_mock_app(FIXTURES)


@pytest.fixture(scope="session")
def mock_client(mock_app):
    with TestClient(mock_app) as client:
        yield client


@pytest.fixture(scope="session")
def mock_server(mock_app):
    with ServerThread(mock_app) as server:
        yield server.url


@pytest.fixture(scope="session")
def engine_server():
    from latentedit.service.app import create_app

    with ServerThread(create_app()) as server:
        yield server.url


@pytest.fixture
def eiam_env(mock_server, monkeypatch):
    monkeypatch.setenv("EIAM_CAPTION_URL", f"{mock_server}/caption")
    monkeypatch.setenv("EIAM_REASON_URL", f"{mock_server}/reason")
    monkeypatch.setenv("EIAM_SEGMENT_URL", f"{mock_server}/segment")
    return mock_server


def make_volume(seed: int, shape=(2, 2, 8, 8), offset: float = 0.0) -> LatentVolume:
    return LatentVolume(gaussian(seed, 900, shape) + offset)


def patterned_mean(shape, amplitude=0.3) -> np.ndarray:
    """Smooth non-constant condition mean; keeps inversion tests non-degenerate."""
    yy, xx = np.meshgrid(
        np.linspace(-1, 1, shape[2]), np.linspace(-1, 1, shape[3]), indexing="ij"
    )
    return amplitude * np.broadcast_to(np.sin(3 * xx) * np.cos(2 * yy), shape).copy()


def make_mask(shape=(2, 8, 8), box=((2, 5), (2, 5))) -> EditMask:
    mask = np.zeros(shape)
    (r0, r1), (c0, c1) = box
    mask[:, r0:r1, c0:c1] = 1.0
    return EditMask(mask)


@pytest.fixture
def demo_inputs(tmp_path):
    """Source latent + mask + world files matching the bundled EIAM fixtures."""
    shape = (2, 2, 24, 24)
    mask = np.zeros((2, 24, 24))
    mask[:, 9:15, 9:15] = 1.0
    mu_source = np.zeros(shape)
    mu_target = mu_source + 4.0 * np.broadcast_to(mask[:, None], shape)
    source = LatentVolume(mu_source + gaussian(11, 0, shape))

    paths = {
        "source": tmp_path / "source.latf",
        "mask": tmp_path / "mask.latf",
        "mu_source": tmp_path / "mu_source.latf",
        "mu_target": tmp_path / "mu_target.latf",
        "world": tmp_path / "world.txt",
    }
    write_volume(paths["source"], source)
    write_volume(paths["mask"], EditMask(mask))
    write_volume(paths["mu_source"], LatentVolume(mu_source))
    write_volume(paths["mu_target"], LatentVolume(mu_target))

    from latentedit import embed_prompt

    sid = embed_prompt(SOURCE_PROMPT).condition_id
    tid = embed_prompt(TARGET_PROMPT).condition_id
    paths["world"].write_text(f"{sid} mu_source.latf\n{tid} mu_target.latf\n")
    return {
        "paths": paths,
        "source": source,
        "mask": EditMask(mask),
        "mu_source": LatentVolume(mu_source),
        "mu_target": LatentVolume(mu_target),
        "source_id": sid,
        "target_id": tid,
    }
