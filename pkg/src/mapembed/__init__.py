"""Multimodal word embeddings from a learned language-to-vision mapping."""

__version__ = "0.1.0"
