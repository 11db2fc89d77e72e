"""Uncore frequency scaling driven by memory-throughput dynamics."""

__version__ = "0.1.0"
