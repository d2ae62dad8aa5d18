"""Embedding sidecar: a small HTTP service that turns text and images into vectors.

The service itself is model-agnostic plumbing; the actual encoding lives in a
backend selected by model id (see `backend.load_backend`). Whatever the
backend, the wire contract is the same: order-preserving, deterministic,
non-normalized vectors of a fixed dimension.
"""
from .backend import EncoderBackend, HashEncoder, UndecodableImageError, load_backend
from .service import create_app, main

__all__ = [
    "EncoderBackend",
    "HashEncoder",
    "UndecodableImageError",
    "load_backend",
    "create_app",
    "main",
]
