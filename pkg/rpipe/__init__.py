"""Protocol programs, pipeline architectures, and the tools between them."""

__version__ = "0.1.0"
