"""Conversational prediction and DFNN training service for categorical tabular data."""

__version__ = "0.1.0"
