"""Multi-agent engine for arrhythmia findings, guideline fact-checking, and reports."""

__version__ = "0.1.0"
