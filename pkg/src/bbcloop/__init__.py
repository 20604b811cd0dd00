"""Control-loop characterization of a bidirectional buck-boost converter."""

__version__ = "0.1.0"
