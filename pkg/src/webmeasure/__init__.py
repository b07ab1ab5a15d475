"""LLM-based website labeling and tracking measurements over crawled landing pages."""

__version__ = "0.1.0"
