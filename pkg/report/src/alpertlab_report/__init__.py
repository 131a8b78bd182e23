"""Turn alpertlab CSV/JSON experiment outputs into figures and a summary report."""

__version__ = "0.1.0"
