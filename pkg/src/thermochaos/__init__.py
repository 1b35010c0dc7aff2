"""Thermogram lesion analysis: boundary chaos features, diffusion sampling,
generative metrics and a boosted-tree classifier."""

__version__ = "0.1.0"
