"""Converters from public RF dataset releases to the canonical rfmsm format,
plus t-SNE rendering of exported encoder embeddings."""

__version__ = "0.1.0"
