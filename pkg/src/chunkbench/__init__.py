"""Text chunking strategies and a dense-retrieval benchmark for comparing them."""

__version__ = "0.1.0"
