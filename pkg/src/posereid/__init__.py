"""Pose-guided vehicle image synthesis and re-identification, desk-scale."""

__version__ = "0.1.0"
