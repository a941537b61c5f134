"""Design and verification toolkit for a parallel-plate cylindrical-lens beam-steering antenna."""

__version__ = "0.1.0"
