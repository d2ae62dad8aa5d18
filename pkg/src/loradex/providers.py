"""Embedding providers: where vectors come from.

The engine never loads an encoder itself. It talks to an
`EmbeddingProvider`, which is either a lookup over previously computed
records (`FileBackedProvider` — fully deterministic, the right choice for
tests and replays) or a thin client for a remote encoder service
(`RemoteProvider`).

Providers return float32 matrices with one row per input, in input order.
"""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CacheMissError, CapabilityError, DataError, ProviderError
from .store import DEFAULT_ENCODER_TAG, EmbeddingCorpus, GenerationRecord, load_corpus

logger = logging.getLogger(__name__)


@dataclass
class ProbeResult:
    encoder_tag: str
    dim: int
    capabilities: frozenset[str]


class EmbeddingProvider:
    """Interface: `encoder_tag`, `dim`, `capabilities`, and the embed calls."""

    encoder_tag: str
    dim: int
    capabilities: frozenset[str]

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        raise NotImplementedError

    def embed_images(self, blobs: Sequence[bytes]) -> np.ndarray:
        raise NotImplementedError

    def probe(self) -> ProbeResult:
        return ProbeResult(self.encoder_tag, self.dim, self.capabilities)


def _check_texts(texts: Sequence[str]) -> None:
    if len(texts) == 0:
        raise DataError("embed_texts called with no texts")
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t:
            exc = DataError(f"text at position {i} is empty")
            exc.item_index = i
            raise exc


def probe(provider: EmbeddingProvider, expect_dim: int | None = None,
          expect_tag: str | None = None) -> ProbeResult:
    """Handshake helper: fetch provider identity and check expectations."""
    result = provider.probe()
    if expect_dim is not None and result.dim != expect_dim:
        raise ProviderError(f"provider dim {result.dim} != expected {expect_dim}")
    if expect_tag is not None and result.encoder_tag != expect_tag:
        raise ProviderError(
            f"provider encoder_tag {result.encoder_tag!r} != expected {expect_tag!r}"
        )
    return result


class FileBackedProvider(EmbeddingProvider):
    """Serves embeddings from cached records; any miss is an error.

    Text lookups are keyed by the exact text; image lookups by the SHA-256
    of the image bytes. Build caches with the same records files the rest of
    the pipeline uses (text records carry their text in ``prompt_id``).
    """

    def __init__(
        self,
        text_vectors: dict[str, np.ndarray] | None = None,
        image_vectors: dict[str, np.ndarray] | None = None,
        dim: int | None = None,
        encoder_tag: str = DEFAULT_ENCODER_TAG,
    ):
        self._text = dict(text_vectors or {})
        self._image = dict(image_vectors or {})
        if dim is None:
            probe_vec = next(iter(self._text.values()), None)
            if probe_vec is None:
                probe_vec = next(iter(self._image.values()), None)
            if probe_vec is None:
                raise DataError("empty provider cache and no dim given")
            dim = int(probe_vec.shape[0])
        self.dim = dim
        self.encoder_tag = encoder_tag
        caps = set()
        if self._text:
            caps.add("text")
        if self._image:
            caps.add("image")
        self.capabilities = frozenset(caps)
        for key, vec in list(self._text.items()) + list(self._image.items()):
            if vec.shape != (dim,):
                raise DataError(f"cached vector for {key!r} has shape {vec.shape}, expected ({dim},)")

    @classmethod
    def from_corpus(cls, corpus: EmbeddingCorpus) -> "FileBackedProvider":
        text = {t: v for t, v in corpus.text_items()}
        if not text:
            raise DataError("corpus holds no text records to serve")
        return cls(text_vectors=text, dim=corpus.dim, encoder_tag=corpus.encoder_tag)

    @classmethod
    def from_path(cls, path: str | Path, encoder_tag: str = DEFAULT_ENCODER_TAG) -> "FileBackedProvider":
        corpus = load_corpus(path, encoder_tag=encoder_tag)
        return cls.from_corpus(corpus)

    @classmethod
    def from_records(
        cls, records: Iterable[GenerationRecord], dim: int,
        encoder_tag: str = DEFAULT_ENCODER_TAG,
    ) -> "FileBackedProvider":
        text: dict[str, np.ndarray] = {}
        image: dict[str, np.ndarray] = {}
        for rec in records:
            if rec.kind == "text":
                text[rec.prompt_id] = rec.vector
            else:
                image[rec.prompt_id] = rec.vector
        return cls(text, image, dim=dim, encoder_tag=encoder_tag)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        _check_texts(texts)
        if "text" not in self.capabilities:
            raise CapabilityError("this provider cache holds no text embeddings")
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, t in enumerate(texts):
            vec = self._text.get(t)
            if vec is None:
                shown = t if len(t) <= 120 else t[:117] + "..."
                exc = CacheMissError(f"no cached embedding for text {shown!r}")
                exc.item_index = i
                raise exc
            out[i] = vec
        return out

    def embed_images(self, blobs: Sequence[bytes]) -> np.ndarray:
        if "image" not in self.capabilities:
            raise CapabilityError("this provider cache holds no image embeddings")
        if len(blobs) == 0:
            raise DataError("embed_images called with no images")
        out = np.empty((len(blobs), self.dim), dtype=np.float32)
        for i, blob in enumerate(blobs):
            key = hashlib.sha256(blob).hexdigest()
            vec = self._image.get(key)
            if vec is None:
                exc = CacheMissError(f"no cached embedding for image sha256={key[:16]}...")
                exc.item_index = i
                raise exc
            out[i] = vec
        return out


class RemoteProvider(EmbeddingProvider):
    """Client for an HTTP encoder service.

    Batches are chunked to `batch_size` and issued over at most
    `max_in_flight` concurrent requests; responses are reassembled in input
    order, so concurrency never changes results. The service is probed once
    (GET /v1/info) for its tag, dimension, and capabilities.
    """

    def __init__(
        self,
        base_url: str,
        batch_size: int = 64,
        max_in_flight: int = 4,
        timeout: float = 60.0,
        session=None,
    ):
        if batch_size < 1 or max_in_flight < 1:
            raise DataError("batch_size and max_in_flight must be >= 1")
        import requests

        self.base_url = base_url.rstrip("/")
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.timeout = timeout
        self._session = session or requests.Session()
        self._probed: ProbeResult | None = None

    # -- wire helpers ------------------------------------------------------

    def _request(self, method: str, path: str, **kwargs):
        import requests

        url = f"{self.base_url}{path}"
        try:
            resp = self._session.request(method, url, timeout=self.timeout, **kwargs)
        except requests.RequestException as exc:
            raise ProviderError(f"encoder service unreachable at {url}: {exc}") from exc
        if resp.status_code >= 400:
            detail = ""
            try:
                detail = resp.json().get("detail", "")
            except Exception:
                detail = resp.text[:200]
            raise ProviderError(f"encoder service returned {resp.status_code} for {path}: {detail}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderError(f"encoder service sent non-JSON for {path}") from exc

    def probe(self) -> ProbeResult:
        if self._probed is None:
            info = self._request("GET", "/v1/info")
            try:
                self._probed = ProbeResult(
                    encoder_tag=str(info["encoder_tag"]),
                    dim=int(info["dim"]),
                    capabilities=frozenset(info.get("capabilities", ["text"])),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ProviderError(f"malformed /v1/info response: {info!r}") from exc
        return self._probed

    @property
    def encoder_tag(self) -> str:  # type: ignore[override]
        return self.probe().encoder_tag

    @property
    def dim(self) -> int:  # type: ignore[override]
        return self.probe().dim

    @property
    def capabilities(self) -> frozenset[str]:  # type: ignore[override]
        return self.probe().capabilities

    # -- embedding ---------------------------------------------------------

    def _embed_chunks(self, path: str, key: str, items: Sequence, count: int) -> np.ndarray:
        info = self.probe()
        chunks = [
            (start, list(items[start:start + self.batch_size]))
            for start in range(0, count, self.batch_size)
        ]

        def one(chunk):
            start, payload_items = chunk
            payload = self._request("POST", path, json={key: payload_items})
            vectors = np.asarray(payload["vectors"], dtype=np.float32)
            if vectors.ndim != 2 or vectors.shape != (len(payload_items), info.dim):
                raise ProviderError(
                    f"encoder service returned shape {vectors.shape} for a"
                    f" {len(payload_items)}-item batch of dim {info.dim}"
                )
            # `truncated` is aligned with the batch: one bool per input.
            truncated = payload.get("truncated") or []
            for offset, flag in enumerate(truncated):
                if flag:
                    logger.warning("encoder truncated item %d", start + offset)
            return start, vectors

        out = np.empty((count, info.dim), dtype=np.float32)
        if len(chunks) == 1:
            start, vectors = one(chunks[0])
            out[start:start + vectors.shape[0]] = vectors
        else:
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                for start, vectors in pool.map(one, chunks):
                    out[start:start + vectors.shape[0]] = vectors
        return out

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        _check_texts(texts)
        return self._embed_chunks("/v1/embed_text", "texts", list(texts), len(texts))

    def embed_images(self, blobs: Sequence[bytes]) -> np.ndarray:
        if len(blobs) == 0:
            raise DataError("embed_images called with no images")
        if "image" not in self.capabilities:
            raise CapabilityError("encoder service does not embed images")
        import base64

        encoded = [base64.b64encode(b).decode("ascii") for b in blobs]
        return self._embed_chunks("/v1/embed_image", "images", encoded, len(encoded))


def provider_from_spec(spec: str, encoder_tag: str = DEFAULT_ENCODER_TAG) -> EmbeddingProvider:
    """Build a provider from a CLI/env spec: an http(s) URL or a cache path."""
    if spec.startswith("http://") or spec.startswith("https://"):
        return RemoteProvider(spec)
    return FileBackedProvider.from_path(spec, encoder_tag=encoder_tag)
