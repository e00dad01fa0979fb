"""Master equations on locally ultrametric state spaces."""

__version__ = "0.1.0"
