"""Structural-concept prototype spaces.

Derive concept prototypes from precomputed word representations, quantify
cross-lingual alignability of the resulting spaces, and meta-learn
alignment functions for zero-shot and few-shot concept classification.
"""

from . import cli, featurestore, geometry, metalearn, probe, synth, tensorcore, treebank

__all__ = [
    "cli",
    "featurestore",
    "geometry",
    "metalearn",
    "probe",
    "synth",
    "tensorcore",
    "treebank",
]

__version__ = "0.1.0"
