"""Modality-matched linguistic distances."""

__version__ = "0.1.0"
