"""Multichain Loran positioning with differential temporal-ASF corrections."""

__version__ = "0.1.0"
