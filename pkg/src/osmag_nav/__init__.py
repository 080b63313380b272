"""Semantic area-graph navigation on osmAG maps with an LLM copilot."""

__version__ = "0.1.0"
