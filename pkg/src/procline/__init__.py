"""Scoping and instantiation of software process lines."""

__version__ = "0.1.0"
