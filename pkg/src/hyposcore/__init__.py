"""Toolkit for evaluating LLM error correction of Chinese ASR output with Pinyin regularization."""

__version__ = "0.1.0"
