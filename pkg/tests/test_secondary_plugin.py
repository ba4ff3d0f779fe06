"""The reference captioner plugin driven by the real plugin harness.

These tests need the TypeScript plugin built (cd captioner-ref &&
npm install && npm run build); they skip when the build output or
node itself is missing.
"""

from __future__ import annotations

import shutil
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from avtk.caption import CaptionerSpec, PluginClient, caption_paths, validate_caption
from avtk.errors import CaptionerFailure
from avtk.pack import encode_image
from avtk.media import FrameBuffer
from conftest import single_scene_avr

PLUGIN_MAIN = Path(__file__).resolve().parents[1] / "captioner-ref" / "dist" / "main.js"

pytestmark = pytest.mark.skipif(
    not PLUGIN_MAIN.exists() or shutil.which("node") is None,
    reason="captioner-ref is not built",
)


def plugin_command() -> str:
    return f"node {PLUGIN_MAIN}"


def spec(**overrides) -> CaptionerSpec:
    base = dict(kind="external", command=plugin_command(),
                min_tokens=10, max_tokens=20, beams=2,
                min_words=1, max_words=20, timeout=30.0)
    base.update(overrides)
    return CaptionerSpec(**base)


def frame(arr: np.ndarray) -> FrameBuffer:
    return FrameBuffer.from_array(arr, Fraction(0))


@pytest.fixture(scope="module")
def fixture_images(tmp_path_factory) -> list[Path]:
    """Ten varied images, alternating JPEG and PNG."""
    root = tmp_path_factory.mktemp("plugin_fixtures")
    rng = np.random.default_rng(77)
    arrays = [
        np.full((64, 64, 3), (220, 30, 30), np.uint8),
        np.full((64, 64, 3), (30, 60, 210), np.uint8),
        np.full((64, 64, 3), 12, np.uint8),
        np.full((64, 64, 3), 240, np.uint8),
        np.tile(np.linspace(0, 255, 96, dtype=np.uint8)[None, :, None], (64, 1, 3)),
        np.tile(np.linspace(255, 0, 96, dtype=np.uint8)[:, None, None], (1, 64, 3)),
        rng.integers(0, 256, (72, 72, 3), dtype=np.uint8),
        rng.integers(0, 256, (48, 80, 3), dtype=np.uint8),
        np.full((96, 48, 3), (40, 160, 60), np.uint8),
        np.full((48, 96, 3), 128, np.uint8),
    ]
    paths = []
    for i, arr in enumerate(arrays):
        fmt = "jpeg" if i % 2 == 0 else "png"
        path = root / f"fix_{i}.{'jpg' if fmt == 'jpeg' else 'png'}"
        path.write_bytes(encode_image(frame(np.ascontiguousarray(arr)), image_format=fmt))
        paths.append(path)
    return paths


def test_client_gets_valid_captions(fixture_images):
    client = PluginClient(plugin_command(), spec())
    try:
        for path in fixture_images[:4]:
            caption = client.caption(path)
            assert validate_caption(caption, 1, 20) is None
            assert 10 <= len(caption.split()) <= 20
        assert client.alive
    finally:
        client.close()


def test_client_caption_is_deterministic(fixture_images):
    client = PluginClient(plugin_command(), spec())
    try:
        first = client.caption(fixture_images[0])
        second = client.caption(fixture_images[0])
        assert first == second
    finally:
        client.close()


def test_missing_file_is_clean_err(fixture_images):
    client = PluginClient(plugin_command(), spec())
    try:
        with pytest.raises(CaptionerFailure, match="file not found"):
            client.caption(fixture_images[0].parent / "missing.jpg")
        # a clean single-line ERR must not poison the client
        assert client.alive
        assert client.caption(fixture_images[0]).strip()
    finally:
        client.close()


def test_env_token_bounds_reach_the_plugin(fixture_images):
    client = PluginClient(plugin_command(), spec(min_tokens=14, max_tokens=15))
    try:
        for path in fixture_images[:3]:
            words = client.caption(path).split()
            assert 14 <= len(words) <= 15
    finally:
        client.close()


def test_beams_env_changes_phrasing(fixture_images):
    a = PluginClient(plugin_command(), spec(beams=1, max_tokens=30))
    b = PluginClient(plugin_command(), spec(beams=4, max_tokens=30))
    try:
        captions_a = [a.caption(p) for p in fixture_images]
        captions_b = [b.caption(p) for p in fixture_images]
        assert captions_a != captions_b
    finally:
        a.close()
        b.close()


def test_caption_paths_all_ten_fixtures(fixture_images):
    tasks = list(enumerate(fixture_images))
    captions, drops = caption_paths(tasks, spec(), workers=2)
    assert drops == {}
    assert sorted(captions) == list(range(10))
    for text in captions.values():
        assert validate_caption(text, 1, 20) is None
        assert 10 <= len(text.split()) <= 20


def test_caption_stage_through_cli(tmp_path):
    from avtk.cli import main

    video = single_scene_avr(tmp_path / "scene.avr", duration=4.4, fps=8,
                             width=120, height=90)
    out = tmp_path / "out"
    assert main(["extract", str(video), "--out", str(out)]) == 0
    assert main(["caption", "--out", str(out),
                 "--captioner", plugin_command()]) == 0
    rows = (out / "captions" / "captions.csv").read_text().splitlines()
    assert rows[0] == "id,text"
    assert len(rows) > 1
