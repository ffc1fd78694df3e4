"""Certified randomness from Bell-test trial records.

Fits a non-signaling model to training trials, builds a Bell function, runs
the running-product test with a freeze rule, converts a pass into a smooth
min-entropy certificate, and extracts near-uniform bits with a seeded
Trevisan-style extractor.
"""

__version__ = "0.1.0"
