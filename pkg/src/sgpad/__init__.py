"""Saliency-guided training toolkit for fingerprint presentation attack detection."""

__version__ = "0.1.0"
