"""Dual-branch 3D visual grounding with box-surface position encoding and text-gated attention."""

__version__ = "0.1.0"
