"""Posted pricing for online cloud resource allocation."""

__version__ = "0.1.0"
