"""
metakit: few-shot meta-learning toolkit.

Meta-datasets (datasets of datasets) with N-way/k-shot task sampling,
support/query splitting and batch collation, a float64 reverse-mode autodiff
engine with higher-order gradients, parameter-substituting meta-modules and
a MAML reference trainer.
"""

__version__ = "1.0.0"
