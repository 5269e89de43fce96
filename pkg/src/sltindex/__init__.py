"""Grammar-compressed structural self-index for XML."""

__version__ = "0.1.0"
