"""Lifecycle metadata registry and passport compiler for healthcare AI models."""

__version__ = "0.1.0"
