"""Synthetic-audio fine-tuning for cognitive state prediction.

Augments text corpora with zero-shot TTS audio, trains text, audio and fused
models, and evaluates the gain with exact significance tests.
"""

__version__ = "0.1.0"
