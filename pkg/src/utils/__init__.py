"""Shared utilities for CardioVAE."""

from .logger import setup_logging

__all__ = ["setup_logging"]
