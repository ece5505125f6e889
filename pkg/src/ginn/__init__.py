"""GARCH-informed LSTM volatility forecasting."""

__version__ = "0.1.0"
