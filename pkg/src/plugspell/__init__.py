"""Pluggable character-level spelling correction.

A frozen base corrector (embedding, transformer encoder, correction head)
plus additive domain plugin encoders, an unsupervised confusion-corruption
data pipeline, and dual-prediction over-correction repair.
"""

__version__ = "0.1.0"
