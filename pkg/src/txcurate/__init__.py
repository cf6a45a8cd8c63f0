"""Curation, enrichment and risk classification for bank transactions."""

__version__ = "0.1.0"
