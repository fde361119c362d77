"""Throughput and decoding-delay experiments for linear network coding on erasure broadcast channels."""

__version__ = "0.1.0"
