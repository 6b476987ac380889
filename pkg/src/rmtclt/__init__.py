"""Linear spectral statistics of centralized sample covariance and F-matrices."""

__version__ = "0.1.0"
