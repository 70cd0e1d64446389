"""AIS stream decoding, navigational-status validation, and port-call analytics."""

__version__ = "0.1.0"
