"""Learning predicate-template abstract domains and affine abstract
transformers for an abstraction-guided string-transformation synthesizer."""

__version__ = "0.1.0"
