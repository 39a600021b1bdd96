"""Offline figure generation from simulation CSV/JSONL outputs."""

__version__ = "0.1.0"
