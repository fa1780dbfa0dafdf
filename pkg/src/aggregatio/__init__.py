"""Motivated reasoning in jury voting and sequential social learning."""

__version__ = "0.1.0"
