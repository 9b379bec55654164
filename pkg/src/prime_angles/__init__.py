"""Fine-scale statistics of Gaussian prime angles and two exactly checkable models."""

__version__ = "0.1.0"
