"""embextract: sentence-embedding extraction into EMB1 containers.

Feeds the bitextmine alignment pipeline: each supported model turns a
sentence-per-line text file into an EMB1 embedding file with one row per
line, in order, at the model's documented dimension.
"""

from .backends import MODEL_DIMS, Encoder, get_encoder, load_lock, register_backend
from .errors import CountMismatchError, ExtractorError, InputError, ModelError
from .extract import ExtractorJob, extract, read_sentences
from .writer import EMB1_MAGIC, Emb1Writer

__all__ = [
    "CountMismatchError",
    "EMB1_MAGIC",
    "Emb1Writer",
    "Encoder",
    "ExtractorError",
    "ExtractorJob",
    "InputError",
    "MODEL_DIMS",
    "ModelError",
    "extract",
    "get_encoder",
    "load_lock",
    "read_sentences",
    "register_backend",
]

__version__ = "0.1.0"
