"""G-computation with machine-learning outcome models for randomized trials."""

__version__ = "0.1.0"
