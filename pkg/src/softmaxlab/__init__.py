"""Desk-scale laboratory for single-layer softmax-attention expressivity.

A 1-layer single-token-output transformer (positional-encoding table,
softmax pooling, ReLU MLP head, strict sign decision) evaluated under
configurable precision, together with the task oracles, softmax
decomposition, hypothesis-class shattering machinery, operation-count VC
bounds, an explicit palindrome recognizer, and training/audit drivers that
probe all of it at small n.
"""

__version__ = "0.1.0"

from .model import TransformerSpec, forward, random_spec  # noqa: F401
from .numerics import PrecisionConfig  # noqa: F401
