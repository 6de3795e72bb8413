"""Virtual smart-home simulation service for explainability studies."""

__version__ = "0.1.0"
