"""End-to-end check against the engine's remote-provider client.

Spins the real ASGI app in a uvicorn thread and drives it through
`loradex.providers.RemoteProvider` — the client this service exists to feed —
so the wire contract is exercised from both sides of the socket.
"""
import threading
import time

import numpy as np
import pytest

loradex_providers = pytest.importorskip("loradex.providers")

import uvicorn

from embed_sidecar.backend import HashEncoder
from embed_sidecar.service import create_app

from test_backend import tiny_png


@pytest.fixture(scope="module")
def base_url():
    config = uvicorn.Config(create_app(), host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("sidecar did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


@pytest.fixture(scope="module")
def provider(base_url):
    return loradex_providers.RemoteProvider(base_url, batch_size=2)


def test_probe_handshake(provider):
    result = provider.probe()
    assert result.dim == 512
    assert result.encoder_tag == "dev-hash-512-unnormalized"
    assert result.capabilities == frozenset({"text", "image"})


def test_chunked_texts_match_backend_bitwise(provider):
    texts = [f"probe text {i}" for i in range(5)]  # 3 chunks at batch_size=2
    via_wire = provider.embed_texts(texts)
    direct, _ = HashEncoder().encode_text(texts)
    assert via_wire.dtype == np.float32
    assert np.array_equal(via_wire, direct)


def test_truncation_warning_carries_batch_index(provider, caplog):
    texts = ["fine", "fine too", " ".join(["long"] * 100)]
    with caplog.at_level("WARNING", logger="loradex.providers"):
        provider.embed_texts(texts)
    hits = [m for m in caplog.messages if "truncated" in m]
    assert hits == ["encoder truncated item 2"]


def test_images_travel_as_base64(provider):
    blob = tiny_png()
    via_wire = provider.embed_images([blob])
    direct = HashEncoder().encode_image([blob])
    assert np.array_equal(via_wire, direct)
