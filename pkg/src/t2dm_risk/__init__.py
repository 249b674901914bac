"""Multimodal (ECG + clinical risk factor) T2DM risk models and comparison statistics."""

__version__ = "0.1.0"
