"""Routing protocols over pluggable transports, in a deterministic simulator."""

__version__ = "0.1.0"
