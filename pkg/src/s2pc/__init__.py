"""Client-aided two-party computation of linear dynamic controllers."""

__version__ = "0.1.0"
