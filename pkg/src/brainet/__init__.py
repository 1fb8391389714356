"""Biomarker discovery toolkit: bootstrapped multi-model training, pooled
Shapley importances, and case/control comparison of thresholded biomarker
correlation graphs."""

__version__ = "0.1.0"
