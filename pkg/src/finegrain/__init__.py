"""Leakage-guarded backtesting of a hierarchical multi-agent stock-scoring pipeline."""

__version__ = "0.1.0"
