"""Essence neural networks: feed-forward networks assembled from clustering and
linear SVMs, with gradient-trained baselines and evaluation tooling."""

__version__ = "0.1.0"
