"""Detect 360-degree video sessions from encrypted traffic statistics."""

__version__ = "0.1.0"
