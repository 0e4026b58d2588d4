"""Shared fixtures: deterministic stand-in encoders.

The bundled backends resolve to real network-weight checkpoints; tests
substitute a deterministic encoder through the same registry seam callers
use, so every path from CLI flag to EMB1 byte runs without downloading a
model.  The stub maps each sentence to a unit vector derived only from the
sentence text, so identical lines get bitwise-identical rows.
"""

from __future__ import annotations

import hashlib

import numpy as np
import pytest

from embextract import Encoder, register_backend
from embextract.backends import _REGISTRY


def stub_vector(sentence: str, dim: int) -> np.ndarray:
    """Unit vector determined only by the sentence text."""
    digest = hashlib.sha256(sentence.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    vector = rng.standard_normal(dim).astype(np.float32)
    return vector / np.linalg.norm(vector)


def stub_encoder(dim: int, name: str = "stub") -> Encoder:
    """An Encoder that embeds sentences with :func:`stub_vector`."""

    def encode(sentences: list[str]) -> np.ndarray:
        if not sentences:
            return np.zeros((0, dim), dtype=np.float32)
        return np.stack([stub_vector(s, dim) for s in sentences])

    return Encoder(encode=encode, dim=dim, checkpoint=f"{name}-test-weights", name=name)


@pytest.fixture
def patched_backend():
    """Install backend loaders for one test, restoring the registry after."""
    saved = dict(_REGISTRY)

    def install(name: str, loader) -> None:
        register_backend(name, loader)

    yield install
    _REGISTRY.clear()
    _REGISTRY.update(saved)


@pytest.fixture
def stub_labse(patched_backend) -> Encoder:
    """Replace the real LaBSE loader with the deterministic 768-dim stub."""
    encoder = stub_encoder(768, name="labse")
    patched_backend("labse", lambda device=None, lang="en": encoder)
    return encoder
