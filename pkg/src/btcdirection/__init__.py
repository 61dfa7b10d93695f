"""Next-day Bitcoin direction classification with a confidence-gated daily backtest."""

__version__ = "0.1.0"
