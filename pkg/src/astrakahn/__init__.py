"""Coordination toolkit for stream-processing networks of boxes and synchronisers."""

__version__ = "0.1.0"
