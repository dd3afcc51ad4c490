"""Window-based multi-output gradient-boosted regression trees for forecasting."""

__version__ = "0.1.0"
