"""Standardized input-file extraction from text and pretrained masked LMs."""

from .contextual import ExtractionSummary, extract_contextual
from .corpus import CorpusError, Utterance, Word, load_utterances, write_utterances
from .pll import PllSummary, extract_pll
from .static_vectors import (VectorModel, create_vector_model, extract_static,
                             load_vector_model)

__version__ = "0.1.0"

__all__ = [
    "CorpusError", "ExtractionSummary", "PllSummary", "Utterance", "VectorModel",
    "Word", "create_vector_model", "extract_contextual", "extract_pll",
    "extract_static", "load_utterances", "load_vector_model", "write_utterances",
]
