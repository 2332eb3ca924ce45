"""Bridge from transformer encoders to the EMBD embedding interchange format."""

from .extract import ExtractionError, extract_embeddings, read_sentences
from .pooling import POOLING_MODES, pool_hidden_states
from .writer import write_embd

__version__ = "0.1.0"

__all__ = [
    "ExtractionError",
    "POOLING_MODES",
    "extract_embeddings",
    "pool_hidden_states",
    "read_sentences",
    "write_embd",
    "__version__",
]
