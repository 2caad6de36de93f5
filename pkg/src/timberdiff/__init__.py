"""Scan-to-CAD deviation analysis for timber elements and assemblies."""

__version__ = "0.1.0"
