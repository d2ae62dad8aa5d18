"""Encoder backends.

A backend owns the actual encoding math; the HTTP layer only does batching,
validation, and serialization. The contract every backend must honor:

- `encode_text(texts)` returns `(vectors, truncated)` where `vectors` is a
  float32 array of shape (len(texts), dim) in input order and `truncated[i]`
  says whether input i exceeded the token limit (it still gets a vector,
  computed from the first `token_limit` tokens).
- `encode_image(blobs)` returns float32 (len(blobs), dim); an undecodable
  payload raises `UndecodableImageError` carrying the offending index.
- Outputs are deterministic for identical inputs and are NOT normalized:
  vector magnitude is part of the signal downstream, so backends must never
  rescale to unit norm.

The default `dev-hash/512` backend needs no model weights: it derives vectors
from SHA-256 of the input. It exists so the service, its clients, and CI can
exercise the full wire contract anywhere; swap in a real encoder by
registering a constructor in `_REGISTRY` under its model id.
"""
from __future__ import annotations

import hashlib
import io
from typing import Callable, Protocol, Sequence

import numpy as np

DEFAULT_MODEL_ID = "dev-hash/512"


class UndecodableImageError(Exception):
    """Raised when an image payload cannot be decoded. Carries its batch index."""

    def __init__(self, index: int, reason: str):
        super().__init__(f"image at position {index}: {reason}")
        self.index = index
        self.reason = reason


class EncoderBackend(Protocol):
    model_id: str
    encoder_tag: str
    dim: int
    token_limit: int

    def encode_text(self, texts: Sequence[str]) -> tuple[np.ndarray, list[bool]]: ...

    def encode_image(self, blobs: Sequence[bytes]) -> np.ndarray: ...


def _hash_vector(key: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")
    return np.random.default_rng(seed).standard_normal(dim)


class HashEncoder:
    """Deterministic weights-free encoder.

    Text: whitespace tokens become position-tagged gaussian vectors (seeded by
    SHA-256) and are summed, plus a constant bias so the empty string still
    maps somewhere. Norms therefore grow with token count and differ across
    inputs — deliberately non-normalized, like the encoders it stands in for.

    Images: the payload must decode as an actual image (that is what a real
    encoder would choke on); the vector is derived from a hash of the raw
    bytes, so identical files agree bit-wise and any byte change moves the
    vector.
    """

    def __init__(self, dim: int = 512, token_limit: int = 77,
                 model_id: str = DEFAULT_MODEL_ID,
                 encoder_tag: str = "dev-hash-512-unnormalized"):
        self.dim = dim
        self.token_limit = token_limit
        self.model_id = model_id
        self.encoder_tag = encoder_tag
        self._bias = _hash_vector(f"{model_id}|bias", dim)

    def _text_vector(self, text: str) -> tuple[np.ndarray, bool]:
        tokens = text.split()
        truncated = len(tokens) > self.token_limit
        acc = self._bias.copy()
        for i, tok in enumerate(tokens[: self.token_limit]):
            acc += _hash_vector(f"tok|{i}|{tok}", self.dim)
        return acc, truncated

    def encode_text(self, texts: Sequence[str]) -> tuple[np.ndarray, list[bool]]:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        truncated = []
        for i, text in enumerate(texts):
            vec, was_cut = self._text_vector(text)
            out[i] = vec.astype(np.float32)
            truncated.append(was_cut)
        return out, truncated

    def encode_image(self, blobs: Sequence[bytes]) -> np.ndarray:
        from PIL import Image

        out = np.empty((len(blobs), self.dim), dtype=np.float32)
        for i, blob in enumerate(blobs):
            if not blob:
                raise UndecodableImageError(i, "empty payload")
            try:
                with Image.open(io.BytesIO(blob)) as img:
                    img.verify()
            except Exception as exc:
                raise UndecodableImageError(i, str(exc) or type(exc).__name__) from exc
            key = hashlib.sha256(blob).hexdigest()
            out[i] = _hash_vector(f"img|{key}", self.dim).astype(np.float32)
        return out


_REGISTRY: dict[str, Callable[[], EncoderBackend]] = {
    DEFAULT_MODEL_ID: HashEncoder,
}


def load_backend(model_id: str = DEFAULT_MODEL_ID, device: str = "cpu") -> EncoderBackend:
    """Instantiate the backend registered under `model_id`.

    `device` is accepted for parity with weight-bearing backends; the hash
    backend ignores it.
    """
    try:
        factory = _REGISTRY[model_id]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ValueError(f"unknown model id {model_id!r}; registered: {known}") from None
    del device
    return factory()
