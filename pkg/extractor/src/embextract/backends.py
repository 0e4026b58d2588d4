"""Embedding backends: named sentence encoders with pinned checkpoints.

Each supported model name maps to a loader that builds an :class:`Encoder`.
The mapping from name to concrete checkpoint lives in ``models.lock.json``,
which ships inside the package so that two installs of the same version
always resolve a name to the same weights.

Backends are imported lazily: ``sentence-transformers`` or
``laserembeddings`` is only required when the corresponding model name is
actually requested.  Tests (and embedders not known to this package) can
plug in their own loader via :func:`register_backend`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Protocol

import numpy as np

from .errors import InputError, ModelError

__all__ = [
    "Encoder",
    "MODEL_DIMS",
    "get_encoder",
    "load_lock",
    "register_backend",
]

#: Embedding width each model name must produce.  These are properties of
#: the published checkpoints, not tunables: LaBSE emits 768-dimensional
#: vectors and LASER emits 1024-dimensional vectors.
MODEL_DIMS: dict[str, int] = {"labse": 768, "laser": 1024}


class _EncodeFn(Protocol):
    def __call__(self, sentences: list[str]) -> np.ndarray: ...


@dataclass(frozen=True)
class Encoder:
    """A ready-to-use sentence encoder.

    ``encode`` maps a list of sentences to a 2-D float array with one row
    per sentence; ``dim`` is the expected embedding width and ``checkpoint``
    identifies the exact weights behind the encoder (recorded in the
    output's metadata sidecar).
    """

    encode: _EncodeFn
    dim: int
    checkpoint: str
    name: str = field(default="")


def load_lock() -> dict[str, dict]:
    """Return the packaged model lock table (name -> backend/checkpoint/dim)."""
    text = resources.files(__package__).joinpath("models.lock.json").read_text("utf-8")
    return json.loads(text)


def _load_labse(device: str | None, lang: str) -> Encoder:
    lock = load_lock()["labse"]
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:  # pragma: no cover - depends on extras installed
        raise ModelError(
            "model 'labse' needs the sentence-transformers package; "
            "install with: pip install 'embextract[labse]'"
        ) from exc

    model = SentenceTransformer(lock["model_id"], device=device)

    def encode(sentences: list[str]) -> np.ndarray:
        return np.asarray(
            model.encode(sentences, convert_to_numpy=True, show_progress_bar=False),
            dtype=np.float32,
        )

    return Encoder(encode=encode, dim=int(lock["dim"]), checkpoint=lock["model_id"], name="labse")


def _load_laser(device: str | None, lang: str) -> Encoder:
    lock = load_lock()["laser"]
    try:
        from laserembeddings import Laser
    except ImportError as exc:  # pragma: no cover - depends on extras installed
        raise ModelError(
            "model 'laser' needs the laserembeddings package; "
            "install with: pip install 'embextract[laser]'"
        ) from exc

    laser = Laser()

    def encode(sentences: list[str]) -> np.ndarray:
        return np.asarray(laser.embed_sentences(sentences, lang=lang), dtype=np.float32)

    return Encoder(encode=encode, dim=int(lock["dim"]), checkpoint=lock["model_id"], name="laser")


_LoaderFn = Callable[..., Encoder]

_REGISTRY: dict[str, _LoaderFn] = {
    "labse": _load_labse,
    "laser": _load_laser,
}


def register_backend(name: str, loader: _LoaderFn) -> None:
    """Register (or replace) the loader behind a model name.

    The loader is called as ``loader(device=..., lang=...)`` and must return
    an :class:`Encoder`.  This is the seam test suites use to substitute a
    deterministic stub for the real network-weight models.
    """
    _REGISTRY[name] = loader


def get_encoder(name: str, device: str | None = None, lang: str = "en") -> Encoder:
    """Build the encoder behind ``name``.

    Raises :class:`InputError` for a name with no registered backend and
    :class:`ModelError` when the backend exists but fails to load (missing
    package, missing weights, bad device string, ...).
    """
    try:
        loader = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise InputError(f"unknown model {name!r} (known models: {known})") from None

    try:
        encoder = loader(device=device, lang=lang)
    except (InputError, ModelError):
        raise
    except Exception as exc:
        raise ModelError(f"failed to load model {name!r}: {exc}") from exc

    expected = MODEL_DIMS.get(name)
    if expected is not None and encoder.dim != expected:
        raise ModelError(
            f"backend for {name!r} reports dimension {encoder.dim}, expected {expected}"
        )
    return encoder
