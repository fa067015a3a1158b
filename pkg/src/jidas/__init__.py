"""Joint identification and sensing over state-dependent multiple access channels."""

__version__ = "0.1.0"
